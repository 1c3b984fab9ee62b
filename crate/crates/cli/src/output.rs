use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use clap::ValueEnum;
use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use crate::{CliError, Common};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub fn display<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(value)
}

fn io_err(e: impl Display) -> CliError {
    CliError::Output(e.to_string())
}

/// Destination for one command's output. Every artifact carries the tool
/// version, the seed and the full configuration.
pub struct Sink {
    out: Box<dyn Write>,
    format: Format,
    command: &'static str,
    seed: u64,
    config: Value,
}

impl Sink {
    pub fn open<A: Serialize>(common: &Common, command: &'static str, args: &A) -> Result<Self, CliError> {
        let out: Box<dyn Write> = match &common.out {
            Some(path) => Box::new(BufWriter::new(File::create(path).map_err(io_err)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        let mut config = serde_json::to_value(common).map_err(io_err)?;
        let extra = serde_json::to_value(args).map_err(io_err)?;
        if let (Some(base), Value::Object(more)) = (config.as_object_mut(), extra) {
            base.extend(more);
        }
        let mut sink = Self { out, format: common.format, command, seed: common.seed, config };
        if sink.format == Format::Csv {
            sink.comment(&format!("tool: cookie-walk {}", cookie_walk::VERSION))?;
            sink.comment(&format!("command: {command}"))?;
            sink.comment(&format!("seed: {}", sink.seed))?;
            let config = sink.config.to_string();
            sink.comment(&format!("config: {config}"))?;
        }
        Ok(sink)
    }

    pub fn comment(&mut self, line: &str) -> Result<(), CliError> {
        writeln!(self.out, "# {line}").map_err(io_err)
    }

    pub fn json(&mut self, result: Value) -> Result<(), CliError> {
        let doc = json!({
            "tool": "cookie-walk",
            "version": cookie_walk::VERSION,
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "result": result,
        });
        serde_json::to_writer_pretty(&mut self.out, &doc).map_err(io_err)?;
        writeln!(self.out).map_err(io_err)
    }

    pub fn csv_rows<R: Serialize>(&mut self, rows: &[R]) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut self.out);
        for r in rows {
            w.serialize(r).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(io_err)
    }
}
