//! Gzip-compressed JSON-lines episode logs: a header, one record per
//! transition, then a summary. Floats are written at full precision so a
//! replay can compare bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use explore_core::community::SplitEvent;
use explore_core::env::{EnvConfig, ExpertTrace, Metrics, Observation, Transition};
use flate2::read::GzDecoder;
use flate2::{Compression, GzBuilder};
use serde::{Deserialize, Serialize};

pub const LOG_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: u32,
    pub policy: String,
    pub map_seed: u64,
    pub config: EnvConfig,
    pub observation: Observation,
    /// Expert plan at reset.
    pub expert: Option<ExpertTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub transition: Transition,
    /// Replan made after this step, when there was one.
    pub expert: Option<ExpertTrace>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub splits: Vec<SplitEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub metrics: Metrics,
    /// `completed`, `truncated` or the error that stopped the run.
    pub outcome: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Header(Header),
    Step(StepRecord),
    Summary(Summary),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub header: Header,
    pub steps: Vec<StepRecord>,
    pub summary: Summary,
}

impl EpisodeLog {
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        let mut put = |line: &Line| -> Result<()> {
            serde_json::to_writer(&mut out, line)?;
            out.write_all(b"\n")?;
            Ok(())
        };
        put(&Line::Header(self.header.clone()))?;
        for s in &self.steps {
            put(&Line::Step(s.clone()))?;
        }
        put(&Line::Summary(self.summary.clone()))
    }

    /// Gzip bytes with a zeroed timestamp, so equal logs give equal files.
    pub fn to_gzip(&self) -> Result<Vec<u8>> {
        let mut gz = GzBuilder::new().mtime(0).write(Vec::new(), Compression::default());
        self.write_jsonl(&mut gz)?;
        Ok(gz.finish()?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_gzip()?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<Self> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut summary = None;
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parsed: Line =
                serde_json::from_str(&line).with_context(|| format!("log line {}", n + 1))?;
            match parsed {
                Line::Header(h) if n == 0 => header = Some(h),
                Line::Step(s) if header.is_some() && summary.is_none() => steps.push(s),
                Line::Summary(s) if header.is_some() && summary.is_none() => summary = Some(s),
                _ => bail!("log line {} is out of order", n + 1),
            }
        }
        let (Some(header), Some(summary)) = (header, summary) else {
            bail!("log is missing its header or summary");
        };
        if header.format != LOG_FORMAT {
            bail!("unsupported log format {}", header.format);
        }
        Ok(Self {
            header,
            steps,
            summary,
        })
    }

    pub fn from_gzip(data: impl Read) -> Result<Self> {
        Self::read_jsonl(BufReader::new(GzDecoder::new(data)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_gzip(file)
    }
}
