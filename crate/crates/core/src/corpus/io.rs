//! JSON Lines corpus files: one header record, then one video per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HecvlError, Result};

use super::{Corpus, GeneratorConfig, LectureVideo};

pub const SCHEMA: &str = "hiercorpus/1";

#[derive(Serialize)]
struct HeaderOut<'a> {
    schema: &'a str,
    config: &'a Option<GeneratorConfig>,
}

#[derive(Deserialize)]
struct HeaderIn {
    schema: String,
    #[serde(default)]
    config: serde_json::Value,
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut w: W) -> Result<()> {
    let header = HeaderOut {
        schema: SCHEMA,
        config: &corpus.config,
    };
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    for v in &corpus.videos {
        serde_json::to_writer(&mut w, v).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus<R: Read>(r: R) -> Result<Corpus> {
    let mut lines = BufReader::new(r).lines();
    let header_line = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(HecvlError::Parse {
                line: 1,
                message: "missing header record".into(),
            })
        }
    };
    let header: HeaderIn = serde_json::from_str(&header_line).map_err(|e| HecvlError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.schema != SCHEMA {
        return Err(HecvlError::Version {
            found: header.schema,
        });
    }
    let config: Option<GeneratorConfig> =
        serde_json::from_value(header.config).map_err(|e| HecvlError::Parse {
            line: 1,
            message: format!("config: {e}"),
        })?;

    let mut videos = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let video: LectureVideo = serde_json::from_str(&line).map_err(|e| HecvlError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        video.validate().map_err(|e| HecvlError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        videos.push(video);
    }
    Corpus::new(config, videos)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let f = File::create(path)?;
    write_corpus(corpus, BufWriter::new(f))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    read_corpus(File::open(path)?)
}
