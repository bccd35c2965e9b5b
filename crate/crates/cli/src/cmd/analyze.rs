use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crowd_mdp::analysis::{direction_kde, motion_histogram, MotionHistogram};
use crowd_mdp::trajectory::{discretize, read_trajectory_csv, MotionStep, DEFAULT_SPEED_THRESHOLD};
use crowd_mdp::Vec2;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{load, require, set, set_opt};
use crate::error::{CliError, CliResult};
use crate::output::{stamp, write_atomic, write_stamp};
use crate::AnalyzeArgs;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeParams {
    pub input: Option<PathBuf>,
    pub exit: Option<[f64; 2]>,
    pub dt: f64,
    pub speed_threshold: f64,
    pub angle_bins: usize,
    pub length_bins: usize,
    pub max_length: Option<f64>,
    pub kde_points: usize,
    pub bandwidth: Option<f64>,
    pub out_dir: PathBuf,
}

impl Default for AnalyzeParams {
    fn default() -> Self {
        Self {
            input: None,
            exit: None,
            dt: 1.0,
            speed_threshold: DEFAULT_SPEED_THRESHOLD,
            angle_bins: 36,
            length_bins: 10,
            max_length: None,
            kde_points: 360,
            bandwidth: None,
            out_dir: PathBuf::from("."),
        }
    }
}

impl AnalyzeParams {
    fn resolve(args: AnalyzeArgs) -> CliResult<Self> {
        let mut p: Self = load(args.config.as_deref())?;
        set_opt(&mut p.input, args.input);
        set_opt(&mut p.exit, args.exit);
        set(&mut p.dt, args.dt);
        set(&mut p.speed_threshold, args.speed_threshold);
        set(&mut p.angle_bins, args.angle_bins);
        set(&mut p.length_bins, args.length_bins);
        set_opt(&mut p.max_length, args.max_length);
        set(&mut p.kde_points, args.kde_points);
        set_opt(&mut p.bandwidth, args.bandwidth);
        set(&mut p.out_dir, args.out_dir);
        Ok(p)
    }
}

pub fn run(args: AnalyzeArgs) -> CliResult<()> {
    let params = AnalyzeParams::resolve(args)?;
    let input = require(&params.input, "input")?;
    let [ex, ey] = require(&params.exit, "exit")?;
    let exit = Vec2::new(ex, ey);
    let file = File::open(&input).map_err(CliError::io(format!("cannot read {}", input.display())))?;
    let records = read_trajectory_csv::<f64, _>(file)?;
    if records.iter().all(|r| r.samples().len() < 2) {
        return Err(CliError::Input("need ≥ 2 samples of at least one pedestrian".into()));
    }

    let mut steps: Vec<MotionStep<f64>> = Vec::new();
    for r in &records {
        steps.extend(discretize(r, params.dt, exit)?);
    }
    let fast: Vec<MotionStep<f64>> = steps.iter().copied().filter(|s| s.speed >= params.speed_threshold).collect();
    info!("{} steps, {} at or above {} m/s", steps.len(), fast.len(), params.speed_threshold);

    // Both tables share the length range so they can be compared cell by cell.
    let max_length = params
        .max_length
        .unwrap_or_else(|| steps.iter().map(MotionStep::length).fold(0.0, f64::max));
    let tag = stamp(&params)?;
    let out = &params.out_dir;
    for (name, subset) in [("histogram.csv", &steps), ("histogram_filtered.csv", &fast)] {
        let hist = motion_histogram(subset, params.angle_bins, params.length_bins, Some(max_length))?;
        write_atomic(&out.join(name), |w| write_histogram(w, &hist, &tag))?;
    }
    for (name, subset) in [("kde.csv", &steps), ("kde_filtered.csv", &fast)] {
        write_kde(&out.join(name), subset, &params, &tag)?;
    }
    println!("analyzed {} pedestrians, {} steps ({} after speed filter)", records.len(), steps.len(), fast.len());
    Ok(())
}

fn write_histogram(w: &mut dyn Write, hist: &MotionHistogram<f64>, tag: &str) -> CliResult<()> {
    write_stamp(w, tag)?;
    let mut csv = csv::Writer::from_writer(w);
    let bad = |e: csv::Error| CliError::Core(e.into());
    csv.write_record(["angle_lo", "angle_hi", "length_lo", "length_hi", "count"]).map_err(bad)?;
    for (i, row) in hist.counts.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            csv.serialize((
                hist.angle_edges[i],
                hist.angle_edges[i + 1],
                hist.length_edges[j],
                hist.length_edges[j + 1],
                count,
            ))
            .map_err(bad)?;
        }
    }
    csv.flush().map_err(CliError::io("cannot write histogram"))
}

fn write_kde(path: &Path, steps: &[MotionStep<f64>], params: &AnalyzeParams, tag: &str) -> CliResult<()> {
    let kde = match direction_kde(steps, params.bandwidth, params.kde_points) {
        Ok(kde) => Some(kde),
        Err(crowd_mdp::Error::EmptyInput(reason)) => {
            warn!("{}: {reason}; writing an empty density", path.display());
            None
        }
        Err(e) => return Err(e.into()),
    };
    write_atomic(path, |w| {
        write_stamp(w, tag)?;
        if let Some(kde) = &kde {
            writeln!(w, "# bandwidth {}", kde.bandwidth).map_err(CliError::io("cannot write density"))?;
        }
        let mut csv = csv::Writer::from_writer(w);
        let bad = |e: csv::Error| CliError::Core(e.into());
        csv.write_record(["angle", "density"]).map_err(bad)?;
        if let Some(kde) = &kde {
            for (a, d) in kde.angles.iter().zip(&kde.density) {
                csv.serialize((a, d)).map_err(bad)?;
            }
        }
        csv.flush().map_err(CliError::io("cannot write density"))
    })
}
