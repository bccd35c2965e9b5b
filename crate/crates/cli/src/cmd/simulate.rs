use std::path::PathBuf;

use crowd_mdp::environment::simulate_step;
use crowd_mdp::{Cell, Lattice, LatticeConfig, OccupancyGrid, StaticField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{load, require, set, set_opt};
use crate::error::{CliError, CliResult};
use crate::output::{read_json, stamp, write_atomic, write_stamp};
use crate::SimulateArgs;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub lattice: Option<PathBuf>,
    pub initial: Option<Vec<u32>>,
    pub steps: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            lattice: None,
            initial: None,
            steps: 100,
            seed: 0,
            out: PathBuf::from("trace.csv"),
        }
    }
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let mut params: SimulateParams = load(args.config.as_deref())?;
    set_opt(&mut params.lattice, args.lattice);
    set_opt(&mut params.initial, args.initial);
    set(&mut params.steps, args.steps);
    set(&mut params.seed, args.seed);
    set(&mut params.out, args.out);

    let config: LatticeConfig = read_json(&require(&params.lattice, "lattice")?, "lattice")?;
    let lattice = Lattice::from_config(&config)?;
    let field = StaticField::<f64>::build(&lattice);
    let initial: Vec<Cell> = require(&params.initial, "initial")?.into_iter().map(Cell).collect();
    let mut tau = OccupancyGrid::from_particles(&lattice, &initial)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let tag = stamp(&params)?;
    let open: Vec<Cell> = lattice.open_cells().collect();
    let mut frames = vec![tau.clone()];
    for _ in 0..params.steps {
        tau = simulate_step(&tau, &field, &lattice, &mut rng)?;
        frames.push(tau.clone());
    }
    write_atomic(&params.out, |w| {
        write_stamp(w, &tag)?;
        let io = CliError::io("cannot write trace");
        let mut body = String::from("t,cell_index,occupied\n");
        for (t, frame) in frames.iter().enumerate() {
            for &c in &open {
                body.push_str(&format!("{t},{c},{}\n", u8::from(frame.is_occupied(c))));
            }
        }
        w.write_all(body.as_bytes()).map_err(io)
    })?;
    let last = frames.last().map_or(0, OccupancyGrid::count);
    println!(
        "simulated {} steps from {} particles; {} remain",
        params.steps,
        initial.len(),
        last
    );
    Ok(())
}
