use capreg::duopoly::{
    contract_prices_competitive, fb_payments_competitive, m_hat_competitive,
    sb_controls_competitive,
};
use capreg::monopoly::{
    contract_prices_monopoly, sb_controls_monopoly, sb_payments_monopoly, DerivativeMode,
};
use capreg::scenario::{scenario_controls, simulate_scenario, SimSettings};
use capreg::simulator::evaluate_contract;
use capreg::{MarketSpec, TimeGrid, VolMode};

const MODES: [VolMode; 2] = [VolMode::Uncontrolled, VolMode::Controlled];

fn grid(spec: &MarketSpec) -> TimeGrid {
    TimeGrid::weekly(spec.principal.horizon).unwrap()
}

fn without_congestion() -> MarketSpec {
    let mut spec = MarketSpec::reference();
    spec.congestion = 0.0;
    spec.firms = [spec.monopolist; 2];
    spec
}

#[test]
fn structures_share_controls_under_matched_payments() {
    let spec = without_congestion();
    let g = grid(&spec);
    for mode in MODES {
        let m = sb_payments_monopoly(&g, &spec, mode).unwrap();
        for k in 0..m.len() {
            let z = [m.z(k, 0, 0), m.z(k, 0, 1)];
            let gamma = [m.gamma(k, 0), m.gamma(k, 1)];
            let w = [m.revenue[k][0], m.revenue[k][1]];
            let cm = sb_controls_monopoly(z, gamma, &spec, mode).unwrap();
            let cc = sb_controls_competitive(z, gamma, &spec, mode).unwrap();
            let forced = m_hat_competitive(&[z[0], 0.0, 0.0, z[1]], w, &spec);
            for j in 0..2 {
                assert!((cm.drift[j] - cc.drift[j]).abs() <= 1e-10 * (1.0 + cm.drift[j].abs()));
                assert!((cm.vol[j] - cc.vol[j]).abs() <= 1e-10 * (1.0 + cm.vol[j].abs()));
                assert!((forced[j] - gamma[j]).abs() <= 1e-10 * gamma[j].abs());
            }
        }
    }
}

#[test]
fn competition_never_holds_less_capacity_without_contracts() {
    let spec = MarketSpec::reference();
    let g = grid(&spec);
    let settings = SimSettings {
        n_paths: 200,
        ..SimSettings::default()
    };
    for mode in ["DC", "DVC"] {
        let cm = scenario_controls(&spec, &g, format!("M-BU-{mode}").parse().unwrap()).unwrap();
        let cc = scenario_controls(&spec, &g, format!("C-BU-{mode}").parse().unwrap()).unwrap();
        let m = simulate_scenario(&spec, &g, &cm, &settings).unwrap();
        let c = simulate_scenario(&spec, &g, &cc, &settings).unwrap();
        for (xm, xc) in m.states.iter().zip(&c.states) {
            for j in 0..2 {
                assert!(xc[j] >= xm[j] - 1e-9, "{mode}: {xc:?} < {xm:?}");
            }
        }
    }
}

#[test]
fn monopoly_contract_splits_into_firm_contracts() {
    let mut spec = without_congestion().risk_neutral_agents();
    spec.monopolist.reservation_ce = 3.0e9;
    spec.firms[0].reservation_ce = 1.0e9;
    spec.firms[1].reservation_ce = 2.0e9;
    let g = grid(&spec);
    for mode in MODES {
        let m = sb_payments_monopoly(&g, &spec, mode).unwrap();
        let c = fb_payments_competitive(&g, &spec).unwrap();
        let pm =
            contract_prices_monopoly(&m, &spec, mode, DerivativeMode::CentralDifference).unwrap();
        let pc = contract_prices_competitive(&c, &spec, mode, DerivativeMode::CentralDifference)
            .unwrap();
        for n in 0..2 {
            assert_eq!(pc.agents[n].terminal, [0.0, 0.0]);
            for k in 0..g.len() {
                let own = pc.agents[n].drift[k][n];
                assert!((own - pm.agents[0].drift[k][n]).abs() <= 1e-9 * (1.0 + own.abs()));
            }
        }
        let tag = format!("M-FB-{}", mode.label()).parse().unwrap();
        let controls = scenario_controls(&spec, &g, tag).unwrap();
        let bundle = simulate_scenario(&spec, &g, &controls, &SimSettings::default()).unwrap();
        let xm = evaluate_contract(&bundle, &pm, &g).unwrap();
        let xc = evaluate_contract(&bundle, &pc, &g).unwrap();
        for (a, b) in xm.iter().zip(&xc) {
            let whole = a[0].total();
            let split = b[0].total() + b[1].total();
            assert!(
                (whole - split).abs() <= 1e-9 * whole.abs(),
                "{whole} vs {split}"
            );
        }
    }
}
