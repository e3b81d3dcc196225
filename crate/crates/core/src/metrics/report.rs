//! Per-view score tables, their aggregates, and cross-method comparison.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde_json::{json, Value};

use super::{spearman, Spearman};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = ["object", "env", "view", "psnr_db", "ssim", "perceptual", "ev_r", "ev_g", "ev_b"];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub object: String,
    pub env: String,
    pub view: String,
    /// `+∞` when the foregrounds are identical.
    pub psnr_db: f64,
    pub ssim: f64,
    pub perceptual: Option<f64>,
    pub ev: [f64; 3],
    /// True when the view was lit by the environment used for reconstruction.
    pub same_environment: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub group: String,
    pub count: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub perceptual: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn aggregate<'a>(group: &str, rows: impl Iterator<Item = &'a MetricsRow> + Clone) -> Aggregate {
    let count = rows.clone().count();
    let perceptual = if count > 0 && rows.clone().all(|r| r.perceptual.is_some()) {
        Some(mean(rows.clone().filter_map(|r| r.perceptual)))
    } else {
        None
    };
    Aggregate {
        group: group.to_string(),
        count,
        psnr_db: mean(rows.clone().map(|r| r.psnr_db)),
        ssim: mean(rows.map(|r| r.ssim)),
        perceptual,
    }
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        Value::Null
    } else {
        json!(if v > 0.0 { "inf" } else { "-inf" })
    }
}

impl MetricsReport {
    /// Means per environment, for same/unseen environment rows, and overall.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let envs: BTreeSet<&str> = self.rows.iter().map(|r| r.env.as_str()).collect();
        let mut out: Vec<Aggregate> =
            envs.into_iter().map(|e| aggregate(e, self.rows.iter().filter(move |r| r.env == e))).collect();
        if self.rows.iter().any(|r| r.same_environment) {
            out.push(aggregate("same_environment", self.rows.iter().filter(|r| r.same_environment)));
            out.push(aggregate("new_environment", self.rows.iter().filter(|r| !r.same_environment)));
        }
        out.push(aggregate("overall", self.rows.iter()));
        out
    }

    pub fn aggregate(&self, group: &str) -> Option<Aggregate> {
        self.aggregates().into_iter().find(|a| a.group == group)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::invalid(e.to_string());
        w.write_record(CSV_HEADER).map_err(err)?;
        for r in &self.rows {
            let f = |v: f64| format!("{v}");
            w.write_record([
                r.object.clone(),
                r.env.clone(),
                r.view.clone(),
                f(r.psnr_db),
                f(r.ssim),
                r.perceptual.map(f).unwrap_or_default(),
                f(r.ev[0]),
                f(r.ev[1]),
                f(r.ev[2]),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let headers = rd.headers().map_err(|e| Error::invalid(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::invalid(format!("unexpected CSV header {headers:?}")));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| Error::invalid(e.to_string()))?;
            let f = |i: usize| -> Result<f64> {
                rec[i].trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{}'", &rec[i])))
            };
            rows.push(MetricsRow {
                object: rec[0].to_string(),
                env: rec[1].to_string(),
                view: rec[2].to_string(),
                psnr_db: f(3)?,
                ssim: f(4)?,
                perceptual: if rec[5].trim().is_empty() { None } else { Some(f(5)?) },
                ev: [f(6)?, f(7)?, f(8)?],
                same_environment: false,
            });
        }
        Ok(Self { rows })
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                json!({
                    "object": r.object,
                    "env": r.env,
                    "view": r.view,
                    "psnr_db": num(r.psnr_db),
                    "ssim": num(r.ssim),
                    "perceptual": r.perceptual.map(num),
                    "ev": r.ev,
                    "same_environment": r.same_environment,
                })
            })
            .collect();
        let aggs: Vec<Value> = self
            .aggregates()
            .iter()
            .map(|a| {
                json!({
                    "group": a.group,
                    "count": a.count,
                    "psnr_db": num(a.psnr_db),
                    "ssim": num(a.ssim),
                    "perceptual": a.perceptual.map(num),
                })
            })
            .collect();
        json!({ "rows": rows, "aggregates": aggs })
    }

    fn view_keys(&self) -> BTreeSet<(String, String, String)> {
        self.rows.iter().map(|r| (r.object.clone(), r.env.clone(), r.view.clone())).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Psnr,
    Ssim,
    Perceptual,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Psnr, Metric::Ssim, Metric::Perceptual];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Psnr => "psnr_db",
            Metric::Ssim => "ssim",
            Metric::Perceptual => "perceptual",
        }
    }

    fn of(self, a: &Aggregate) -> Option<f64> {
        match self {
            Metric::Psnr => Some(a.psnr_db),
            Metric::Ssim => Some(a.ssim),
            Metric::Perceptual => a.perceptual,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MethodScores {
    pub name: String,
    pub relight: Aggregate,
    pub nvs: Aggregate,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub methods: Vec<MethodScores>,
    /// Rank correlation between the relighting and novel-view orderings;
    /// `None` when some method lacks the metric or the ranking is constant.
    pub correlations: Vec<(Metric, Option<Spearman<f64>>)>,
}

fn check_aligned(task: &str, reports: &[(String, MetricsReport)]) -> Result<()> {
    let Some((first_name, first)) = reports.first() else {
        return Err(Error::invalid(format!("no {task} reports")));
    };
    let keys = first.view_keys();
    for (name, r) in &reports[1..] {
        if r.view_keys() != keys {
            return Err(Error::invalid(format!("{task} views of '{name}' differ from '{first_name}'")));
        }
    }
    Ok(())
}

/// Compares methods by their overall means on relighting and novel-view
/// synthesis, and correlates the two rankings per metric.
pub fn compare_methods(relight: &[(String, MetricsReport)], nvs: &[(String, MetricsReport)]) -> Result<Comparison> {
    if relight.len() < 2 {
        return Err(Error::invalid("comparison needs at least two methods"));
    }
    check_aligned("relighting", relight)?;
    check_aligned("novel-view", nvs)?;
    let mut methods = Vec::new();
    for (name, rep) in relight {
        let other = nvs
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::invalid(format!("method '{name}' has no novel-view report")))?;
        methods.push(MethodScores {
            name: name.clone(),
            relight: rep.aggregate("overall").expect("overall aggregate"),
            nvs: other.1.aggregate("overall").expect("overall aggregate"),
        });
    }
    let correlations = Metric::ALL
        .iter()
        .map(|m| {
            let pairs: Option<Vec<(f64, f64)>> =
                methods.iter().map(|s| Some((m.of(&s.relight)?, m.of(&s.nvs)?))).collect();
            let corr = pairs.filter(|p| p.len() >= 2).and_then(|p| {
                let (x, y): (Vec<f64>, Vec<f64>) = p.into_iter().unzip();
                spearman(&x, &y).ok()
            });
            (*m, corr)
        })
        .collect();
    Ok(Comparison { methods, correlations })
}

impl Comparison {
    /// Plain-text table of method means followed by the correlations.
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<20} {:>12} {:>10} {:>12} {:>12} {:>10} {:>12}",
            "method", "relit_psnr", "relit_ssim", "relit_percep", "nvs_psnr", "nvs_ssim", "nvs_percep"
        );
        for m in &self.methods {
            let _ = writeln!(
                s,
                "{:<20} {:>12.4} {:>10.4} {:>12} {:>12.4} {:>10.4} {:>12}",
                m.name,
                m.relight.psnr_db,
                m.relight.ssim,
                opt(m.relight.perceptual),
                m.nvs.psnr_db,
                m.nvs.ssim,
                opt(m.nvs.perceptual)
            );
        }
        let _ = writeln!(s);
        for (metric, c) in &self.correlations {
            match c {
                Some(c) => {
                    let _ = writeln!(s, "{:<12} r_s = {:+.4}  p = {:.4}", metric.name(), c.rho, c.p);
                }
                None => {
                    let _ = writeln!(s, "{:<12} r_s = n/a", metric.name());
                }
            }
        }
        s
    }

    pub fn to_json(&self) -> Value {
        json!({
            "methods": self.methods.iter().map(|m| json!({
                "name": m.name,
                "relight": {"psnr_db": num(m.relight.psnr_db), "ssim": num(m.relight.ssim), "perceptual": m.relight.perceptual.map(num)},
                "nvs": {"psnr_db": num(m.nvs.psnr_db), "ssim": num(m.nvs.ssim), "perceptual": m.nvs.perceptual.map(num)},
            })).collect::<Vec<_>>(),
            "correlations": self.correlations.iter().map(|(m, c)| json!({
                "metric": m.name(),
                "r_s": c.map(|c| num(c.rho)),
                "p": c.map(|c| num(c.p)),
            })).collect::<Vec<_>>(),
        })
    }
}
