use kslab::initial::make_initial;
use kslab::model::validate_initial;
use kslab::solver::{elliptic_v, laplacian, run, stable_dt, step};
use kslab::{
    DiagnosticsConfig, DiffusionModel, Error, Grid, InitialSpec, Params, SolverConfig, State,
    StopReason, UKind, VKind, VSolver,
};
use proptest::prelude::*;

fn random_state(u: &[f64], v: &[f64], params: &Params, grid: &Grid) -> State {
    let total: f64 = grid.integrate(u);
    let scaled: Vec<f64> = u.iter().map(|x| x * params.mass / total).collect();
    validate_initial(&scaled, v, params, grid).unwrap()
}

fn solver_mode() -> impl Strategy<Value = VSolver> {
    prop_oneof![Just(VSolver::Explicit), Just(VSolver::Implicit)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stable_steps_conserve_mass_and_positivity(
        u in prop::collection::vec(0.0f64..5.0, 32),
        v in prop::collection::vec(-1.0f64..1.0, 32),
        mass in 0.5f64..20.0,
        eps in 0.1f64..2.0,
        gamma in 0.0f64..2.0,
        p in 1.1f64..2.0,
        mode in solver_mode(),
    ) {
        prop_assume!(u.iter().sum::<f64>() > 0.1);
        let grid = Grid::new(32).unwrap();
        let params = Params::new(eps, 1.0, gamma, mass).unwrap();
        let model = DiffusionModel::power_law(1.0, p).unwrap();
        let mut state = random_state(&u, &v, &params, &grid);
        let mut config = SolverConfig::for_mass(mass, 1.0);
        config.v_solver = mode;
        for _ in 0..20 {
            let dt = stable_dt(&state, &params, &model, &grid, &config);
            state = step(&state, &params, &model, &grid, dt, mode).unwrap();
            prop_assert!(state.u.iter().all(|&x| x >= 0.0));
            prop_assert!((state.mass(&grid) - mass).abs() <= 1e-12 * mass);
            prop_assert!(state.v_mean(&grid).abs() <= 1e-12 * (1.0 + state.sup_v()));
        }
    }

    #[test]
    fn elliptic_solution_satisfies_the_discrete_equation(
        u in prop::collection::vec(0.0f64..5.0, 24),
        gamma in 0.0f64..3.0,
        d in 0.2f64..3.0,
    ) {
        prop_assume!(u.iter().sum::<f64>() > 0.1);
        let grid = Grid::new(24).unwrap();
        let params = Params::new(0.0, d, gamma, 2.0).unwrap();
        let state = random_state(&u, &[0.0; 24], &params, &grid);
        let v = elliptic_v(&state.u, &params, &grid).unwrap();
        let lap = laplacian(&v, &grid);
        let mean = grid.integrate(&v);
        prop_assert!(mean.abs() < 1e-12);
        for i in 0..24 {
            // gamma = 0 leaves the constant free; the projection fixes it
            let residual = d * lap[i] - gamma * v[i] + state.u[i] - params.mass;
            prop_assert!(residual.abs() < 1e-8 * (1.0 + state.sup_u()), "cell {i}: {residual}");
        }
    }
}

fn bump_solution(n: usize, model: &DiffusionModel, t_end: f64, drift: f64) -> Vec<f64> {
    let params = Params::new(1.0, 1.0, 0.5, 1.0).unwrap();
    let spec = InitialSpec {
        u: UKind::GaussianBump {
            center: 0.5,
            width: 0.2,
        },
        v: VKind::Zero,
    };
    let grid = Grid::new(n).unwrap();
    let state = make_initial(&spec, &params, &grid).unwrap();
    let mut config = SolverConfig::for_mass(params.mass, t_end);
    config.dt_max = 0.2 * grid.dx() * grid.dx();
    config.dt_init = config.dt_max;
    config.output_stride = usize::MAX;
    config.drift_sign = drift;
    let r = run(
        &state,
        &params,
        model,
        &grid,
        &config,
        &DiagnosticsConfig::default(),
    )
    .unwrap();
    assert_eq!(r.outcome.reason, StopReason::HorizonReached);
    r.final_state.u
}

/// Mean absolute deviation from the reference averaged onto the coarse cells.
fn l1_error(coarse: &[f64], reference: &[f64]) -> f64 {
    let k = reference.len() / coarse.len();
    coarse
        .iter()
        .enumerate()
        .map(|(i, c)| (c - reference[i * k..(i + 1) * k].iter().sum::<f64>() / k as f64).abs())
        .sum::<f64>()
        / coarse.len() as f64
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn diffusion_operator_converges_at_second_order() {
    let model = DiffusionModel::power_law(1.0, 2.0).unwrap();
    let reference = bump_solution(4096, &model, 0.002, 0.0);
    let errors: Vec<f64> = [64, 128, 256, 512]
        .iter()
        .map(|&n| l1_error(&bump_solution(n, &model, 0.002, 0.0), &reference))
        .collect();
    for order in orders(&errors) {
        assert!(
            order >= 1.8,
            "orders {:?}, errors {errors:?}",
            orders(&errors)
        );
    }
}

#[test]
fn upwind_system_converges_at_first_order() {
    let model = DiffusionModel::power_law(1.0, 2.0).unwrap();
    let reference = bump_solution(1024, &model, 0.01, 1.0);
    let errors: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| l1_error(&bump_solution(n, &model, 0.01, 1.0), &reference))
        .collect();
    let o = orders(&errors);
    assert!(
        o.iter().all(|&x| x > 0.7),
        "orders {o:?}, errors {errors:?}"
    );
    assert!(errors.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn reversed_drift_does_not_aggregate() {
    // With the drift sign flipped the chemotactic term repels, so the ramp
    // that blows up under the true dynamics spreads out instead.
    let params = Params::new(1e-3, 1.0, 0.0, 10.0).unwrap();
    let grid = Grid::new(256).unwrap();
    let model = DiffusionModel::power_law(1.0, 2.0).unwrap();
    let state = make_initial(&InitialSpec::paper_ramp(0.05), &params, &grid).unwrap();
    let mut config = SolverConfig::for_mass(params.mass, 0.05);
    config.output_stride = 1000;
    let forward = run(
        &state,
        &params,
        &model,
        &grid,
        &config,
        &DiagnosticsConfig::default(),
    )
    .unwrap();
    config.drift_sign = -1.0;
    let reversed = run(
        &state,
        &params,
        &model,
        &grid,
        &config,
        &DiagnosticsConfig::default(),
    )
    .unwrap();
    assert_eq!(forward.outcome.reason, StopReason::BlowupDetected);
    assert_eq!(reversed.outcome.reason, StopReason::HorizonReached);
    assert!(reversed.final_state.sup_u() < state.sup_u());
}

#[test]
fn constant_state_is_stationary_in_every_mode() {
    let grid = Grid::new(16).unwrap();
    let model = DiffusionModel::power_law(1.0, 2.0).unwrap();
    for (eps, mode) in [
        (1.0, VSolver::Explicit),
        (1.0, VSolver::Implicit),
        (0.0, VSolver::Elliptic),
    ] {
        let params = Params::new(eps, 1.0, 0.3, 2.5).unwrap();
        let state = State {
            t: 0.0,
            u: vec![2.5; 16],
            v: vec![0.0; 16],
        };
        let mut config = SolverConfig::for_mass(2.5, 0.5);
        config.v_solver = mode;
        let r = run(
            &state,
            &params,
            &model,
            &grid,
            &config,
            &DiagnosticsConfig::default(),
        )
        .unwrap();
        assert_eq!(r.outcome.reason, StopReason::HorizonReached);
        assert!(r.final_state.u.iter().all(|&x| (x - 2.5).abs() < 1e-13));
        assert!(r.final_state.v.iter().all(|&x| x.abs() < 1e-13));
        assert!(r
            .series
            .records
            .iter()
            .all(|rec| rec.virial_residual(0).abs() < 1e-9));
    }
}

#[test]
fn run_rejects_inconsistent_configuration() {
    let grid = Grid::new(16).unwrap();
    let model = DiffusionModel::power_law(1.0, 2.0).unwrap();
    let params = Params::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let state = State {
        t: 0.0,
        u: vec![1.0; 16],
        v: vec![0.0; 16],
    };
    let config = SolverConfig::for_mass(1.0, 0.1);
    let err = run(
        &state,
        &params,
        &model,
        &grid,
        &config,
        &DiagnosticsConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidParameter(_)));
    let short = State {
        t: 0.0,
        u: vec![1.0; 8],
        v: vec![0.0; 8],
    };
    let mut elliptic = config.clone();
    elliptic.v_solver = VSolver::Elliptic;
    let err = run(
        &short,
        &params,
        &model,
        &grid,
        &elliptic,
        &DiagnosticsConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::LengthMismatch { .. }));
}

#[test]
fn dt_underflow_is_reported_without_growth() {
    // A dt_min floor above the stable step stalls before any growth history.
    let grid = Grid::new(64).unwrap();
    let params = Params::new(1.0, 1.0, 0.0, 1.0).unwrap();
    let model = DiffusionModel::constant(1.0).unwrap();
    let state = make_initial(
        &InitialSpec {
            u: UKind::GaussianBump {
                center: 0.5,
                width: 0.1,
            },
            v: VKind::Zero,
        },
        &params,
        &grid,
    )
    .unwrap();
    let mut config = SolverConfig::for_mass(1.0, 1.0);
    config.dt_min = 1e-3;
    config.dt_init = 2e-3;
    let r = run(
        &state,
        &params,
        &model,
        &grid,
        &config,
        &DiagnosticsConfig::default(),
    )
    .unwrap();
    assert_eq!(r.outcome.reason, StopReason::DtUnderflow);
    assert_eq!(r.outcome.steps, 0);
}
