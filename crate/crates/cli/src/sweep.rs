//! Parameter sweeps: the cartesian product of `--axis key=v1,v2` lists,
//! one subdirectory per run, a summary table and, when `form` is an axis
//! with `conv` among its values, the per-step error ratios against CONV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nsfem_core::benchmarks::{RunRequest, CONFIG_KEYS};
use nsfem_core::{Error, Result};
use rayon::prelude::*;

use crate::run::{execute, RunOutcome, Status};

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl Axis {
    pub fn parse(spec: &str) -> Result<Axis> {
        let (key, list) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("axis '{spec}' is not of the form key=v1,v2")))?;
        let key = key.trim().trim_start_matches("--").to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown axis key '{key}'")));
        }
        if key == "out" {
            return Err(Error::Config("'out' cannot be swept; each run gets its own subdirectory".into()));
        }
        let values: Vec<String> = list.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::Config(format!("axis '{key}' has no values")));
        }
        Ok(Axis { key, values })
    }
}

/// One point of the product: the axis values in axis order.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub values: Vec<(String, String)>,
}

impl SweepPoint {
    pub fn dir_name(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k}-{}", v.replace(['/', '\\', ' '], "_")))
            .collect::<Vec<_>>()
            .join("_")
    }

    fn value(&self, key: &str) -> Option<&str> {
        self.values.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// The point with `key` removed, identifying runs that differ only there.
    fn without(&self, key: &str) -> Vec<(String, String)> {
        self.values.iter().filter(|(k, _)| k != key).cloned().collect()
    }
}

pub fn product(axes: &[Axis]) -> Vec<SweepPoint> {
    let mut points = vec![SweepPoint { values: Vec::new() }];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut values = p.values.clone();
                    values.push((axis.key.clone(), v.clone()));
                    SweepPoint { values }
                })
            })
            .collect();
    }
    points
}

/// Base pairs followed by the point's values, with the output directory
/// moved below the base output.
pub fn point_request(base: &[(String, String)], root: &Path, point: &SweepPoint) -> Result<RunRequest> {
    let mut pairs = base.to_vec();
    pairs.extend(point.values.iter().cloned());
    pairs.push(("out".into(), root.join(point.dir_name()).display().to_string()));
    RunRequest::from_pairs(&pairs)
}

pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub outcomes: Vec<RunOutcome>,
}

/// Validates every point first, then runs them on `jobs` threads.
pub fn run_sweep(base: &[(String, String)], root: &Path, axes: &[Axis], jobs: usize) -> Result<SweepResult> {
    if axes.is_empty() {
        return Err(Error::Config("a sweep needs at least one --axis".into()));
    }
    let points = product(axes);
    let requests: Vec<RunRequest> = points.iter().map(|p| point_request(base, root, p)).collect::<Result<_>>()?;
    fs::create_dir_all(root).map_err(|e| Error::Config(format!("cannot create '{}': {e}", root.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<RunOutcome> = pool.install(|| {
        requests
            .par_iter()
            .map(|r| {
                let o = execute(r, false);
                eprintln!("{}: {}", r.out.display(), o.status.label());
                o
            })
            .collect()
    });
    let result = SweepResult { points, outcomes };
    let ratios = ratio_streams(&result);
    write(root.join("summary.csv"), &summary_csv(&result, &ratios))?;
    if !ratios.is_empty() {
        write(root.join("ratios.csv"), &ratios_csv(&result, &ratios))?;
    }
    Ok(result)
}

fn write(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::Config(format!("cannot write '{}': {e}", path.display())))
}

/// Per-step `error(run) / error(conv run)` for every non-CONV run whose
/// CONV partner differs from it only in the form. Indexed like the runs.
pub struct RatioStream {
    pub run: usize,
    pub reference: usize,
    /// `(step, time, ratio)`
    pub ratios: Vec<(usize, f64, f64)>,
}

impl RatioStream {
    pub fn max_deviation(&self) -> f64 {
        self.ratios.iter().fold(0.0, |a, r| if r.2.is_nan() { f64::INFINITY } else { a.max((r.2 - 1.0).abs()) })
    }
}

pub fn ratio_streams(res: &SweepResult) -> Vec<RatioStream> {
    let mut out = Vec::new();
    for (i, p) in res.points.iter().enumerate() {
        let Some(form) = p.value("form") else { continue };
        if form.eq_ignore_ascii_case("conv") {
            continue;
        }
        let key = p.without("form");
        let reference = res
            .points
            .iter()
            .position(|q| q.value("form").is_some_and(|f| f.eq_ignore_ascii_case("conv")) && q.without("form") == key);
        let Some(j) = reference else { continue };
        let (a, b) = (&res.outcomes[i].records, &res.outcomes[j].records);
        let ratios: Vec<(usize, f64, f64)> = a
            .iter()
            .zip(b)
            .filter_map(|(x, y)| Some((x.step, x.time, x.l2_error? / y.l2_error?)))
            .collect();
        if !ratios.is_empty() {
            out.push(RatioStream {
                run: i,
                reference: j,
                ratios,
            });
        }
    }
    out
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn summary_csv(res: &SweepResult, ratios: &[RatioStream]) -> String {
    let keys: Vec<&str> = res.points.first().map(|p| p.values.iter().map(|(k, _)| k.as_str()).collect()).unwrap_or_default();
    let mut s = String::from("run");
    for k in &keys {
        let _ = write!(s, ",{k}");
    }
    s.push_str(
        ",status,exit_code,steps,final_time,kinetic_energy,energy_drift,l2_error,div_rec_max,max_ratio_deviation,wall_time\n",
    );
    for (i, (p, o)) in res.points.iter().zip(&res.outcomes).enumerate() {
        let last = o.records.last();
        let dev = ratios.iter().find(|r| r.run == i).map(|r| r.max_deviation());
        let _ = write!(s, "{}", p.dir_name());
        for (_, v) in &p.values {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(
            s,
            ",{},{},{},{},{},{},{},{},{},{:.3}",
            o.status.label(),
            o.status.exit_code(),
            o.records.len(),
            num(last.map(|r| r.time)),
            num(last.map(|r| r.quantities.kinetic_energy)),
            num(o.energy_drift()),
            num(last.and_then(|r| r.l2_error)),
            num(last.map(|r| r.div_rec_max)),
            num(dev),
            o.wall_seconds,
        );
    }
    s
}

pub fn ratios_csv(res: &SweepResult, ratios: &[RatioStream]) -> String {
    let mut s = String::from("run,reference,step,time,ratio\n");
    for r in ratios {
        let (a, b) = (res.points[r.run].dir_name(), res.points[r.reference].dir_name());
        for (step, time, ratio) in &r.ratios {
            let _ = writeln!(s, "{a},{b},{step},{time:.16e},{ratio:.16e}");
        }
    }
    s
}

/// Worst exit code over the runs, blow-ups included.
pub fn exit_code(res: &SweepResult) -> i32 {
    res.outcomes.iter().map(|o| o.status.exit_code()).max().unwrap_or(0)
}

impl SweepResult {
    pub fn completed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.status == Status::Completed).count()
    }
}
