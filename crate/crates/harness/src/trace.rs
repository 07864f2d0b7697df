use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use icls::{IterationView, TraceSink};

/// Writes one JSON object per iteration.
///
/// [`TraceSink::record`] cannot fail, so the first write error is kept and
/// reported by [`JsonlTrace::finish`].
pub struct JsonlTrace<W: Write = BufWriter<File>> {
    writer: W,
    error: Option<std::io::Error>,
}

impl JsonlTrace {
    pub fn create(path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> JsonlTrace<W> {
    pub fn new(writer: W) -> Self {
        Self {
            writer,
            error: None,
        }
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(err) = self.error.take() {
            return Err(err);
        }
        self.writer.flush()?;
        Ok(self.writer)
    }
}

impl<W: Write> TraceSink for JsonlTrace<W> {
    fn record(&mut self, view: &IterationView<'_>) {
        if self.error.is_some() {
            return;
        }
        let result = serde_json::to_writer(&mut self.writer, view.trace)
            .map_err(std::io::Error::from)
            .and_then(|_| self.writer.write_all(b"\n"));
        if let Err(err) = result {
            self.error = Some(err);
        }
    }
}
