//! CSV plot data. Floats are written in shortest round-trip form, so
//! re-reading a file reproduces the values bit for bit.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::analytics::{DegreeHistogram, RatioSeries};
use crate::centrality::{AnomalyFlag, CentralityTimeSeries, CentralityVector};
use crate::communities::CommunityAssignment;
use crate::error::{Error, Result};
use crate::model::{Platform, SliceIndex, TokenId};
use crate::statfit::PowerLawFit;

/// One scalar result, e.g. `density` of `uniswap/t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub platform: Platform,
    pub slice: SliceIndex,
    pub metric: String,
    pub value: f64,
}

fn symbol(t: &TokenId) -> &str {
    t.symbol.as_deref().unwrap_or("")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics<W: Write>(out: W, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["platform", "slice", "metric", "value"])?;
    for r in rows {
        w.write_record([r.platform.name(), &r.slice.to_string(), &r.metric, &r.value.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("csv", e))
}

/// Ranked centrality per vector, one block of rows per slice; `k = None`
/// writes every token.
pub fn write_rankings<W: Write>(out: W, vectors: &[CentralityVector], k: Option<usize>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["platform", "slice", "rank", "address", "symbol", "score"])?;
    for cv in vectors {
        let ranked = crate::centrality::top_k(cv, k.unwrap_or(cv.len()));
        for (i, (t, s)) in ranked.iter().enumerate() {
            w.write_record([
                cv.platform.name(),
                &cv.slice.to_string(),
                &(i + 1).to_string(),
                &t.address.to_string(),
                symbol(t),
                &s.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("csv", e))
}

pub fn write_communities<W: Write>(out: W, assignment: &CommunityAssignment) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["address", "symbol", "community"])?;
    for (t, l) in assignment.tokens.iter().zip(&assignment.labels) {
        w.write_record([t.address.to_string(), symbol(t).to_string(), l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("csv", e))
}

/// Per-slice ratios; empty slices are not part of the series.
pub fn write_ratio_series<W: Write>(out: W, series: &RatioSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slice", "nodes", "edges", "ratio"])?;
    for p in &series.values {
        w.write_record([p.slice.to_string(), p.nodes.to_string(), p.edges.to_string(), p.ratio.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("csv", e))
}

/// Reads back the ratio column of a file written by [`write_ratio_series`].
pub fn read_ratio_values<R: std::io::Read>(input: R) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(input);
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = rec.get(3).unwrap_or("");
        let v: f64 = field
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad ratio value {field:?}")))?;
        values.push(v);
    }
    Ok(values)
}

pub fn write_centrality_series<W: Write>(out: W, series: &[CentralityTimeSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["address", "symbol", "slice", "raw", "normalized"])?;
    for ts in series {
        let addr = ts.token.address.to_string();
        for p in &ts.points {
            w.write_record([&addr, symbol(&ts.token), &p.slice.to_string(), &opt(p.raw), &opt(p.normalized)])?;
        }
    }
    w.flush().map_err(|e| Error::io("csv", e))
}

pub fn write_anomalies<W: Write>(out: W, flags: &[AnomalyFlag]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["address", "symbol", "slice", "raw", "normalized", "threshold", "global_rank"])?;
    for f in flags {
        w.write_record([
            f.token.address.to_string(),
            symbol(&f.token).to_string(),
            f.slice.to_string(),
            f.raw.to_string(),
            f.normalized.to_string(),
            f.threshold.to_string(),
            f.global_rank.map(|r| r.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("csv", e))
}

pub fn write_powerlaw<W: Write>(out: W, platform: &Platform, slice: SliceIndex, fit: &PowerLawFit) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "platform", "slice", "slope", "intercept", "r_squared", "std_error", "t_statistic", "df", "p_value", "n_points",
    ])?;
    w.write_record([
        platform.name().to_string(),
        slice.to_string(),
        fit.slope.to_string(),
        fit.intercept.to_string(),
        fit.r_squared.to_string(),
        fit.std_error.to_string(),
        fit.t_statistic.to_string(),
        fit.degrees_of_freedom.to_string(),
        fit.p_value.to_string(),
        fit.n_points.to_string(),
    ])?;
    w.flush().map_err(|e| Error::io("csv", e))
}

pub fn write_degree_histogram<W: Write>(out: W, hist: &DegreeHistogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["degree", "count"])?;
    for (d, c) in &hist.counts {
        w.write_record([d.to_string(), c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("csv", e))
}

/// Whatever a command produced; each present section becomes one file.
#[derive(Debug, Clone, Default)]
pub struct ReportSet {
    pub metrics: Vec<MetricRow>,
    pub rankings: Option<(Vec<CentralityVector>, Option<usize>)>,
    pub ratio_series: Option<RatioSeries>,
    pub centrality_series: Vec<CentralityTimeSeries>,
    pub anomalies: Option<Vec<AnomalyFlag>>,
    pub powerlaw: Option<(Platform, SliceIndex, PowerLawFit)>,
    pub degree_histogram: Option<DegreeHistogram>,
}

impl ReportSet {
    /// Writes the present sections into `dir` and returns the paths in write order.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut emit = |name: &str, f: &dyn Fn(&mut std::fs::File) -> Result<()>| -> Result<()> {
            let path = dir.join(name);
            let mut file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            f(&mut file)?;
            written.push(path);
            Ok(())
        };
        if !self.metrics.is_empty() {
            emit("metrics.csv", &|f| write_metrics(f, &self.metrics))?;
        }
        if let Some((vectors, k)) = &self.rankings {
            emit("rankings.csv", &|f| write_rankings(f, vectors, *k))?;
        }
        if let Some(rs) = &self.ratio_series {
            emit("ratio_series.csv", &|f| write_ratio_series(f, rs))?;
        }
        if !self.centrality_series.is_empty() {
            emit("centrality_series.csv", &|f| write_centrality_series(f, &self.centrality_series))?;
        }
        if let Some(flags) = &self.anomalies {
            emit("anomalies.csv", &|f| write_anomalies(f, flags))?;
        }
        if let Some((p, s, fit)) = &self.powerlaw {
            emit("powerlaw.csv", &|f| write_powerlaw(f, p, *s, fit))?;
            emit("powerlaw.json", &|f| {
                serde_json::to_writer_pretty(f, fit)?;
                Ok(())
            })?;
        }
        if let Some(h) = &self.degree_histogram {
            emit("degree_histogram.csv", &|f| write_degree_histogram(f, h))?;
        }
        Ok(written)
    }
}
