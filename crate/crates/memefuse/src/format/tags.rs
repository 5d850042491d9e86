//! Sidecar meme-type tags: headerless CSV lines of `id,type`.

use memefuse_core::MemeType;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TagsError {
    #[error("tags line {line}: {source}")]
    Csv {
        line: u64,
        #[source]
        source: csv::Error,
    },
    #[error("tags line {line}: unknown meme type {value:?}")]
    UnknownType { line: u64, value: String },
}

pub fn parse(text: &str) -> Result<Vec<(String, MemeType)>, TagsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in reader.deserialize::<(String, String)>() {
        let (id, ty) = record.map_err(|source| TagsError::Csv {
            line: source.position().map_or(0, |p| p.line()),
            source,
        })?;
        let line = out.len() as u64 + 1;
        let ty = MemeType::parse(&ty).ok_or(TagsError::UnknownType { line, value: ty })?;
        out.push((id, ty));
    }
    Ok(out)
}

pub fn render(tags: &[(String, MemeType)]) -> String {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for (id, ty) in tags {
        writer
            .write_record([id.as_str(), ty.as_str()])
            .expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
}
