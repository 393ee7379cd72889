use kslab::diagnostics::{cumulative, h1_norm, liapunov, mq, virial_rhs, DiagnosticsSeries};
use kslab::initial::make_initial;
use kslab::model::validate_initial;
use kslab::solver::run;
use kslab::{
    DiagnosticsConfig, DiffusionModel, EntropyTable, Grid, InitialSpec, Params, SolverConfig,
    State, UKind, VKind, VSolver,
};
use proptest::prelude::*;

fn state_from(u: &[f64], v: &[f64], params: &Params, grid: &Grid) -> State {
    let total = grid.integrate(u);
    let u: Vec<f64> = u.iter().map(|x| x * params.mass / total).collect();
    validate_initial(&u, v, params, grid).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn liapunov_is_bounded_below(
        u in prop::collection::vec(0.0f64..10.0, 32),
        v in prop::collection::vec(-5.0f64..5.0, 32),
        mass in 0.1f64..20.0,
        d in 0.1f64..3.0,
        gamma in 0.0f64..2.0,
        p in 1.1f64..=2.0,
    ) {
        prop_assume!(u.iter().sum::<f64>() > 0.1);
        let grid = Grid::new(32).unwrap();
        let params = Params::new(1.0, d, gamma, mass).unwrap();
        let table = EntropyTable::new(&DiffusionModel::power_law(1.0, p).unwrap());
        let state = state_from(&u, &v, &params, &grid);
        let l = liapunov(&state, &table, &params, &grid);
        prop_assert!(l >= -mass * mass / (2.0 * d) - 1e-12, "L = {l}");
    }

    #[test]
    fn moment_matches_simpson_on_each_cell(
        u in prop::collection::vec(0.0f64..10.0, 16),
        q in 2.1f64..8.0,
    ) {
        prop_assume!(u.iter().sum::<f64>() > 0.1);
        let grid = Grid::new(16).unwrap();
        let params = Params::new(1.0, 1.0, 0.0, 3.0).unwrap();
        let state = state_from(&u, &[0.0; 16], &params, &grid);
        let cum = cumulative(&state, &grid);
        // U is linear on each cell: composite Simpson with 64 panels per cell
        let mut oracle = 0.0;
        for i in 0..16 {
            let (lo, hi) = (cum.u[i], cum.u[i + 1]);
            let f = |s: f64| (lo + (hi - lo) * s).powf(q);
            let h = 1.0 / 128.0;
            let mut acc = f(0.0) + f(1.0);
            for k in 1..128 {
                acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            oracle += acc * h / 3.0 * grid.dx();
        }
        oracle /= q;
        let value = mq(&cum, q, &grid);
        prop_assert!((value - oracle).abs() <= 1e-9 * oracle, "{value} vs {oracle}");
    }

    #[test]
    fn cumulative_functions_end_at_mass_and_zero(
        u in prop::collection::vec(0.0f64..10.0, 20),
        v in prop::collection::vec(-3.0f64..3.0, 20),
    ) {
        prop_assume!(u.iter().sum::<f64>() > 0.1);
        let grid = Grid::new(20).unwrap();
        let params = Params::new(1.0, 1.0, 0.0, 2.0).unwrap();
        let state = state_from(&u, &v, &params, &grid);
        let cum = cumulative(&state, &grid);
        prop_assert!((cum.u[20] - 2.0).abs() < 1e-12);
        prop_assert!(cum.v[20].abs() < 1e-12);
        prop_assert!(cum.u.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn h1_norm_of_a_cosine_converges() {
    // v = cos(pi x): ||v||^2 = 1/2, ||v_x||^2 = pi^2/2
    let exact = (0.5 + std::f64::consts::PI.powi(2) / 2.0).sqrt();
    let errs: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let grid = Grid::new(n).unwrap();
            let params = Params::new(1.0, 1.0, 0.0, 1.0).unwrap();
            let s = make_initial(
                &InitialSpec {
                    u: UKind::Constant,
                    v: VKind::CosineModes(vec![1.0]),
                },
                &params,
                &grid,
            )
            .unwrap();
            (h1_norm(&s.v, &grid) - exact).abs()
        })
        .collect();
    assert!(errs[2] < 1e-3);
    assert!(errs[0] / errs[1] > 3.5);
}

#[test]
fn virial_rhs_at_constant_density_reduces_to_growth_and_sink() {
    // u = M: m_q = M^q/(q(q+1)), A(M) = -1/(1+M), bulk = -(q-1) M A(M) int x^{q-2} M^{q-2}
    let grid = Grid::new(64).unwrap();
    let params = Params::new(1.0, 1.0, 0.0, 2.0).unwrap();
    let model = DiffusionModel::power_law(1.0, 2.0).unwrap();
    let state = State {
        t: 0.0,
        u: vec![2.0; 64],
        v: vec![0.0; 64],
    };
    let cum = cumulative(&state, &grid);
    let q = 3.0;
    let terms = virial_rhs(&state, &cum, &model, &params, &grid, q).unwrap();
    let m: f64 = 2.0;
    let a = -1.0 / (1.0 + m);
    assert!((terms.growth - m / 1.0 * m.powf(q) / (q * (q + 1.0))).abs() < 1e-12);
    assert!((terms.boundary - m.powf(q - 1.0) * a).abs() < 1e-12);
    assert!((terms.bulk + (q - 1.0) * m * a * m.powf(q - 2.0) / (q - 1.0)).abs() < 1e-12);
    assert!(terms.relaxation.abs() < 1e-12 && terms.decay == 0.0);
    assert!(terms.total().abs() < 1e-12);
}

#[test]
fn series_csv_has_header_and_one_row_per_record() {
    let grid = Grid::new(32).unwrap();
    let params = Params::new(1.0, 1.0, 0.2, 1.0).unwrap();
    let model = DiffusionModel::power_law(1.0, 2.0).unwrap();
    let spec = InitialSpec {
        u: UKind::GaussianBump {
            center: 0.4,
            width: 0.1,
        },
        v: VKind::Zero,
    };
    let state = make_initial(&spec, &params, &grid).unwrap();
    let mut config = SolverConfig::for_mass(1.0, 0.01);
    config.output_stride = 10;
    let diagnostics = DiagnosticsConfig {
        qs: vec![3.0, 4.5],
        ..Default::default()
    };
    let r = run(&state, &params, &model, &grid, &config, &diagnostics).unwrap();
    let mut buf = Vec::new();
    r.series.write_csv(&mut buf).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, r.series.header());
    assert_eq!(&header[..5], ["t", "mass", "v_mean", "L", "diss_cum"]);
    assert!(header.contains(&"mq_q4.5".to_string()));
    assert_eq!(header.last().unwrap(), "h1_v");
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), r.series.records.len());
    let t_end: f64 = rows.last().unwrap()[0].parse().unwrap();
    assert_eq!(t_end, 0.01);
    assert_eq!(
        DiagnosticsSeries {
            qs: vec![3.0],
            records: vec![]
        }
        .header()
        .len(),
        10
    );
}

#[test]
fn elliptic_run_keeps_liapunov_non_increasing() {
    let grid = Grid::new(128).unwrap();
    let params = Params::new(0.0, 1.0, 0.0, 3.0).unwrap();
    let model = DiffusionModel::power_law(1.0, 2.0).unwrap();
    let spec = InitialSpec {
        u: UKind::GaussianBump {
            center: 0.3,
            width: 0.1,
        },
        v: VKind::Zero,
    };
    let state = make_initial(&spec, &params, &grid).unwrap();
    let mut config = SolverConfig::for_mass(3.0, 0.05);
    config.v_solver = VSolver::Elliptic;
    config.output_stride = 20;
    let r = run(
        &state,
        &params,
        &model,
        &grid,
        &config,
        &DiagnosticsConfig::default(),
    )
    .unwrap();
    let l: Vec<f64> = r.series.records.iter().map(|rec| rec.liapunov).collect();
    // the first record still carries the unrelaxed v0 = 0
    assert!(
        l[1..]
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-6 * (1.0 + w[0].abs())),
        "{l:?}"
    );
    assert!(r.series.records.iter().all(|rec| rec.diss_cum == 0.0));
}
