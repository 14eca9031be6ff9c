use learning_egm::belief::Belief;
use learning_egm::config::RunConfig;
use learning_egm::simulate::{simulate_panel, BeliefTracking, InitialState, TransitionSource};
use learning_egm::solver::{solve, PolicyTable};

fn small() -> (RunConfig, PolicyTable) {
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/small.json")).unwrap();
    let (p, _) = solve(&cfg.problem().unwrap(), cfg.solver.tol, cfg.solver.max_iter, None).unwrap();
    (cfg, p)
}

#[test]
fn posterior_is_a_martingale_under_subjective_transitions() {
    let (mut cfg, policy) = small();
    cfg.simulation.transitions = TransitionSource::Subjective;
    cfg.simulation.prior = Belief::new(vec![0.3, 0.7]).unwrap();
    cfg.simulation.n_paths = 4000;
    cfg.simulation.horizon = 60;
    let st = simulate_panel(&policy, &cfg.simulation, &cfg.economy().unwrap()).unwrap();
    for t in 0..st.n_periods() {
        for i in 0..2 {
            let dev = st.mean_posterior[t][i] - cfg.simulation.prior.weights()[i];
            assert!(dev.abs() <= 4.0 * st.se_posterior[t][i] + 1e-12, "t={t} i={i} dev={dev}");
        }
    }
}

#[test]
fn posterior_drifts_to_truth_under_true_transitions() {
    let (mut cfg, policy) = small();
    cfg.simulation.n_paths = 2000;
    let st = simulate_panel(&policy, &cfg.simulation, &cfg.economy().unwrap()).unwrap();
    let last = st.n_periods() - 1;
    assert!(st.mean_posterior[last][1] > 0.99);
}

#[test]
fn rao_blackwell_agrees_and_reduces_noise() {
    let (mut cfg, policy) = small();
    cfg.simulation.n_paths = 3000;
    cfg.simulation.horizon = 40;
    let econ = cfg.economy().unwrap();
    let plain = simulate_panel(&policy, &cfg.simulation, &econ).unwrap();
    cfg.simulation.rao_blackwell = true;
    let rb = simulate_panel(&policy, &cfg.simulation, &econ).unwrap();
    let mut ratio = 0.0;
    for t in 1..plain.n_periods() {
        let se = plain.se_consumption[t].hypot(rb.se_consumption[t]);
        assert!((plain.mean_consumption[t] - rb.mean_consumption[t]).abs() < 5.0 * se + 1e-3, "t={t}");
        ratio += rb.se_consumption[t] / plain.se_consumption[t];
    }
    assert!(ratio / (plain.n_periods() - 1) as f64 <= 1.0);
}

#[test]
fn projected_beliefs_stay_on_the_grid() {
    let (mut cfg, policy) = small();
    cfg.simulation.beliefs = BeliefTracking::ProjectAndPropagate;
    cfg.simulation.n_paths = 1;
    cfg.simulation.horizon = 50;
    let st = simulate_panel(&policy, &cfg.simulation, &cfg.economy().unwrap()).unwrap();
    let grid = policy.beliefs();
    for th in st.mean_posterior.iter().skip(1) {
        let b = Belief::new(th.clone()).unwrap();
        assert!(grid.index_of(&b).is_some(), "{th:?}");
    }
}

#[test]
fn fixed_initial_state_is_reported() {
    let (mut cfg, policy) = small();
    cfg.simulation.initial_state = InitialState::Fixed(1);
    cfg.simulation.n_paths = 200;
    cfg.simulation.horizon = 5;
    let st = simulate_panel(&policy, &cfg.simulation, &cfg.economy().unwrap()).unwrap();
    assert_eq!(st.state_frequency[0], vec![0.0, 1.0]);
    assert_eq!(st.initial_state, InitialState::Fixed(1));
}
