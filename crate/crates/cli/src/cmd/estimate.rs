use std::fs::{self, File};
use std::path::{Path, PathBuf};

use crowd_mdp::mixture::{fit, write_report_csv, DEFAULT_LAMBDA, DEFAULT_PRIOR_STRENGTH};
use crowd_mdp::neighborhood::{
    build_observations, write_observations_csv, NeighborhoodParams, ObservationParams, DEFAULT_RADIUS,
    DEFAULT_WALL_FRACTION,
};
use crowd_mdp::trajectory::{read_trajectory_csv, DEFAULT_SPEED_THRESHOLD};
use crowd_mdp::{MixtureModel, Observation, Vec2, WallGeometry};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{load, require, set, set_opt};
use crate::error::{CliError, CliResult};
use crate::output::{read_json, stamp, write_atomic, write_json, write_stamp};
use crate::EstimateArgs;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateParams {
    pub input: Option<PathBuf>,
    pub walls: Option<PathBuf>,
    pub exit: Option<[f64; 2]>,
    pub dt: f64,
    pub speed_threshold: f64,
    pub radius: f64,
    pub wall_fraction: f64,
    pub include_exited: bool,
    pub prior_strength: f64,
    pub lambda: f64,
    pub out_dir: PathBuf,
}

impl Default for EstimateParams {
    fn default() -> Self {
        Self {
            input: None,
            walls: None,
            exit: None,
            dt: 1.0,
            speed_threshold: DEFAULT_SPEED_THRESHOLD,
            radius: DEFAULT_RADIUS,
            wall_fraction: DEFAULT_WALL_FRACTION,
            include_exited: false,
            prior_strength: DEFAULT_PRIOR_STRENGTH,
            lambda: DEFAULT_LAMBDA,
            out_dir: PathBuf::from("."),
        }
    }
}

impl EstimateParams {
    fn resolve(args: EstimateArgs) -> CliResult<Self> {
        let mut p: Self = load(args.config.as_deref())?;
        set_opt(&mut p.input, args.input);
        set_opt(&mut p.walls, args.walls);
        set_opt(&mut p.exit, args.exit);
        set(&mut p.dt, args.dt);
        set(&mut p.speed_threshold, args.speed_threshold);
        set(&mut p.radius, args.radius);
        set(&mut p.wall_fraction, args.wall_fraction);
        p.include_exited |= args.include_exited;
        set(&mut p.prior_strength, args.prior_strength);
        set(&mut p.lambda, args.lambda);
        set(&mut p.out_dir, args.out_dir);
        Ok(p)
    }
}

#[derive(Serialize)]
struct ModelDump<'a> {
    params: &'a EstimateParams,
    observations: usize,
    #[serde(flatten)]
    model: &'a MixtureModel<f64>,
}

/// A single CSV, or every `*.csv` in a directory sorted by name.
fn trajectory_files(input: &Path) -> CliResult<Vec<PathBuf>> {
    if !input.is_dir() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .map_err(CliError::io(format!("cannot list {}", input.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("no trajectory CSV files in {}", input.display())));
    }
    Ok(files)
}

pub fn run(args: EstimateArgs) -> CliResult<()> {
    let params = EstimateParams::resolve(args)?;
    let input = require(&params.input, "input")?;
    let [ex, ey] = require(&params.exit, "exit")?;
    let exit = Vec2::new(ex, ey);
    let walls: WallGeometry<f64> = match &params.walls {
        Some(path) => {
            let walls: WallGeometry<f64> = read_json(path, "wall geometry")?;
            walls.validate()?;
            walls
        }
        None => WallGeometry::empty(),
    };
    let obs_params = ObservationParams {
        dt: params.dt,
        speed_threshold: params.speed_threshold,
        neighborhood: NeighborhoodParams {
            radius: params.radius,
            wall_fraction: params.wall_fraction,
            ..NeighborhoodParams::default()
        },
        include_exited: params.include_exited,
    };

    // Each file is its own scene; scenes are fitted one after another.
    let mut observations: Vec<Observation<f64>> = Vec::new();
    for file in trajectory_files(&input)? {
        let reader = File::open(&file).map_err(CliError::io(format!("cannot read {}", file.display())))?;
        let records = read_trajectory_csv::<f64, _>(reader)?;
        let obs = build_observations(&records, exit, &walls, &obs_params)?;
        info!("{}: {} pedestrians, {} observations", file.display(), records.len(), obs.len());
        observations.extend(obs);
    }
    if observations.is_empty() {
        return Err(CliError::Input(
            "no observations extracted; check dt, the exit position and that trajectories span at least one step".into(),
        ));
    }
    let model = fit(&observations, params.prior_strength, params.lambda)?;

    let tag = stamp(&params)?;
    let out = &params.out_dir;
    write_json(
        &out.join("model.json"),
        &ModelDump {
            params: &params,
            observations: observations.len(),
            model: &model,
        },
    )?;
    write_atomic(&out.join("report.csv"), |w| Ok(write_report_csv(w, &model, Some(&tag))?))?;
    write_atomic(&out.join("observations.csv"), |w| {
        write_stamp(w, &tag)?;
        Ok(write_observations_csv(w, &observations)?)
    })?;
    let dominant = model.dominant_sector();
    println!(
        "fitted {} observations; largest weight {:.4} on sector {}",
        observations.len(),
        model.weight(dominant),
        dominant.name()
    );
    Ok(())
}
