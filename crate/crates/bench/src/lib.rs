//! Shared fixtures for the benchmarks.

use kslab::initial::make_initial;
use kslab::{DiffusionModel, Grid, InitialSpec, Params, State, UKind, VKind};

/// A smooth subcritical bump with a nonzero signal.
pub fn bump(n: usize) -> (Params, DiffusionModel, Grid, State) {
    let params = Params::new(1.0, 1.0, 0.5, 1.0).unwrap();
    let model = DiffusionModel::power_law(1.0, 2.0).unwrap();
    let grid = Grid::new(n).unwrap();
    let spec = InitialSpec {
        u: UKind::GaussianBump {
            center: 0.4,
            width: 0.1,
        },
        v: VKind::CosineModes(vec![0.1]),
    };
    let state = make_initial(&spec, &params, &grid).unwrap();
    (params, model, grid, state)
}

/// The steep ramp that blows up quickly.
pub fn ramp(n: usize) -> (Params, DiffusionModel, Grid, InitialSpec) {
    let params = Params::new(1e-3, 1.0, 0.0, 10.0).unwrap();
    let model = DiffusionModel::power_law(1.0, 2.0).unwrap();
    (
        params,
        model,
        Grid::new(n).unwrap(),
        InitialSpec::paper_ramp(0.01),
    )
}
