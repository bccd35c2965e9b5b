use std::path::PathBuf;

use crowd_mdp::mdp::{
    backward_induction, brute_force_value, evaluate_policy, PolicyDump, StateSpace,
    DEFAULT_MAX_STATES, DEFAULT_NODE_CAP, DEFAULT_TERMINAL_FACTOR,
};
use crowd_mdp::{FullState, Lattice, LatticeConfig, RewardKind, RewardModel, StaticField};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{load, require, set, set_opt};
use crate::error::{CliError, CliResult};
use crate::output::{read_json, write_json};
use crate::OptimizeArgs;

const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeParams {
    pub lattice: Option<PathBuf>,
    pub particles: Option<usize>,
    pub horizon: usize,
    pub reward: RewardKind,
    pub initial_state: Option<String>,
    pub terminal_factor: f64,
    pub max_states: u128,
    pub oracle_check: bool,
    pub out: PathBuf,
}

impl Default for OptimizeParams {
    fn default() -> Self {
        Self {
            lattice: None,
            particles: None,
            horizon: 6,
            reward: RewardKind::Time,
            initial_state: None,
            terminal_factor: DEFAULT_TERMINAL_FACTOR,
            max_states: DEFAULT_MAX_STATES,
            oracle_check: false,
            out: PathBuf::from("policy.json"),
        }
    }
}

#[derive(Serialize)]
struct PolicyFile<'a> {
    params: &'a OptimizeParams,
    #[serde(flatten)]
    policy: PolicyDump<f64>,
}

pub fn run(args: OptimizeArgs) -> CliResult<()> {
    let mut params: OptimizeParams = load(args.config.as_deref())?;
    set_opt(&mut params.lattice, args.lattice);
    set_opt(&mut params.particles, args.particles);
    set(&mut params.horizon, args.horizon);
    set(&mut params.reward, args.reward);
    set_opt(&mut params.initial_state, args.initial_state);
    set(&mut params.terminal_factor, args.terminal_factor);
    set(&mut params.max_states, args.max_states);
    params.oracle_check |= args.oracle_check;
    set(&mut params.out, args.out);

    let config: LatticeConfig = read_json(&require(&params.lattice, "lattice")?, "lattice")?;
    let lattice = Lattice::from_config(&config)?;
    let field = StaticField::<f64>::build(&lattice);
    let model = RewardModel::new(params.reward).with_terminal_factor(params.terminal_factor);
    let initial: Option<FullState> = params.initial_state.as_deref().map(str::parse).transpose()?;
    if let Some(s0) = &initial {
        s0.validate(&lattice)?;
    }
    let particles = match (params.particles, &initial) {
        (Some(n), Some(s0)) if n < s0.z.len() => {
            return Err(CliError::Input(format!(
                "initial state has {} particles but --particles is {n}",
                s0.z.len()
            )))
        }
        (Some(n), _) => n,
        (None, Some(s0)) => s0.z.len(),
        (None, None) => return Err(CliError::Input("need --particles or --initial-state".into())),
    };
    if params.oracle_check && initial.is_none() {
        return Err(CliError::Input("--oracle-check needs --initial-state".into()));
    }

    let space = StateSpace::auto(
        &lattice,
        &field,
        particles,
        initial.as_ref(),
        params.horizon,
        params.max_states,
    )?;
    info!("{} states in the largest epoch", space.max_layer_len());
    let (policy, values) = backward_induction(&lattice, &field, &model, params.horizon, &space)?;
    write_json(
        &params.out,
        &PolicyFile {
            params: &params,
            policy: policy.dump(&values, params.reward),
        },
    )?;
    println!(
        "solved T = {} with {} reward: {} decisions written to {}",
        params.horizon,
        params.reward,
        policy.num_decisions(),
        params.out.display()
    );

    let Some(s0) = initial else {
        return Ok(());
    };
    let eval = evaluate_policy(&policy, &lattice, &field, &model, params.horizon, &s0)?;
    let value = values
        .get(1, &s0)
        .ok_or_else(|| CliError::Invariant(format!("initial state {s0} missing from the solution")))?;
    if (eval.expected_total_reward - value).abs() > ORACLE_TOLERANCE {
        return Err(CliError::Invariant(format!(
            "policy evaluation {} disagrees with the optimal value {value}",
            eval.expected_total_reward
        )));
    }
    println!("initial state {s0}");
    println!("expected total reward  {:.6}", eval.expected_total_reward);
    println!("expected steps to exit {:.6}", eval.expected_steps_to_exit);
    println!("expected lost conflicts {:.6}", eval.expected_lost_conflicts);

    if params.oracle_check {
        let oracle = brute_force_value(&lattice, &field, &model, params.horizon, &s0, DEFAULT_NODE_CAP)?;
        let diff = (oracle - value).abs();
        if diff > ORACLE_TOLERANCE {
            return Err(CliError::Invariant(format!(
                "oracle value {oracle} differs from the solver by {diff:.3e}"
            )));
        }
        println!("oracle check passed: |v - oracle| = {diff:.3e}");
    }
    Ok(())
}
