//! Text and CSV rendering of command results.

use clap::ValueEnum;
use scanpath_gc::boolcirc::comparison::Similarity;
use scanpath_gc::transport::SessionMetrics;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

/// Ordered `name, value` pairs; one line each as text, one row as CSV.
#[derive(Default)]
pub struct Report {
    fields: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn text(&mut self, name: &str, value: &str) {
        self.fields.push((name.to_string(), value.to_string()));
    }

    pub fn num<T: std::fmt::Display>(&mut self, name: &str, value: T) {
        self.fields.push((name.to_string(), value.to_string()));
    }

    pub fn similarity(&mut self, s: &Similarity) {
        if let Similarity::ScanMatch { raw, .. } = s {
            self.num("raw_score", raw);
        }
        for (name, v) in s.lines() {
            if name != "raw_score" {
                self.num(&name, v);
            }
        }
    }

    pub fn metrics(&mut self, m: &SessionMetrics) {
        self.num("bytes_sent", m.bytes_sent);
        self.num("bytes_received", m.bytes_received);
        self.num("round_trips", m.round_trips);
        self.num("wall_ms", m.wall_time_ms);
    }

    pub fn emit(&self, format: Format) {
        match format {
            Format::Text => {
                for (k, v) in &self.fields {
                    println!("{k}: {v}");
                }
            }
            Format::Csv => write_csv(&[self.fields.iter().map(|(k, _)| k.clone()).collect()], &[self
                .fields
                .iter()
                .map(|(_, v)| v.clone())
                .collect()]),
        }
    }
}

/// Writes a header row and data rows to stdout.
pub fn write_csv(header: &[Vec<String>], rows: &[Vec<String>]) {
    let mut w = csv::Writer::from_writer(std::io::stdout());
    for r in header.iter().chain(rows) {
        w.write_record(r).expect("write to stdout");
    }
    w.flush().expect("write to stdout");
}
