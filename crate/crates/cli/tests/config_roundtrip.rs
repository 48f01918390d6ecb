//! parse(serialize(cfg)) == cfg over randomly generated valid configs.

use proptest::prelude::*;
use spvar::config::{
    parse_config, serialize_config, ExperimentConfig, GridSection, Mode, OutputSection,
    ParamsSection, RhoSection, SeedSection, SolverSection, SweepSection,
};

fn arb_rho() -> impl Strategy<Value = RhoSection> {
    prop_oneof![
        (0.1f64..5.0, -0.2f64..0.5).prop_map(|(rho_inf, k)| RhoSection {
            variant: "constant".into(),
            rho_inf: Some(rho_inf),
            rho0: None,
            s: None,
            a: None,
            sigma: None,
            xb: None,
            beta: None,
            alpha: None,
            k,
        }),
        (0.1f64..3.0, 0.5f64..3.0).prop_map(|(rho0, s)| RhoSection {
            variant: "coercive_power".into(),
            rho_inf: None,
            rho0: Some(rho0),
            s: Some(s),
            a: None,
            sigma: None,
            xb: None,
            beta: None,
            alpha: None,
            k: 0.0,
        }),
        (1.0f64..3.0, 0.1f64..0.9, 0.3f64..2.0, -1.0f64..1.0).prop_map(
            |(rho_inf, frac, sigma, xb1)| RhoSection {
                variant: "bumped_constant".into(),
                rho_inf: Some(rho_inf),
                rho0: None,
                s: None,
                a: Some(frac * rho_inf),
                sigma: Some(sigma),
                xb: Some([xb1, 0.0, 0.0]),
                beta: None,
                alpha: None,
                k: 0.0,
            }
        ),
        (0.2f64..2.0, 0.1f64..0.6, 0.3f64..0.9).prop_map(|(rho0, beta, alpha)| RhoSection {
            variant: "exp_coercive".into(),
            rho_inf: None,
            rho0: Some(rho0),
            s: None,
            a: None,
            sigma: None,
            xb: None,
            beta: Some(beta),
            alpha: Some(alpha),
            k: 0.0,
        }),
    ]
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    (
        prop_oneof![Just(8usize), Just(16), Just(32)],
        1.0f64..10.0,
        arb_rho(),
        2.1f64..4.9,
        0.5f64..=1.0,
        prop_oneof![Just(Mode::Solve), Just(Mode::Diagnose), Just(Mode::Sobolev)],
        1e-10f64..1e-5,
        1usize..20_000,
    )
        .prop_map(|(n, l, rho, p, mu, mode, tol, max_iter)| ExperimentConfig {
            mode,
            grid: GridSection {
                n,
                l,
                center: Some([0.25, -0.5, 0.0]),
            },
            rho,
            params: ParamsSection {
                p,
                mu,
                lambda: 1.0,
                eps: 1.0,
                absolute_value: false,
            },
            solver: SolverSection {
                tol,
                max_iter,
                method: "mountain_pass".into(),
                seed: SeedSection {
                    kind: "gaussian".into(),
                    amplitude: Some(1.5),
                    width: Some(1.0),
                    center: None,
                    rng_seed: None,
                },
            },
            sweep: SweepSection::default(),
            output: OutputSection {
                directory: "out".into(),
                formats: vec!["json".into(), "csv".into()],
            },
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, .. ProptestConfig::default() })]

    #[test]
    fn roundtrip(cfg in arb_config()) {
        let text = serialize_config(&cfg);
        let back = parse_config(&text).expect("serialized config parses");
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn roundtrip_with_sweep_sections() {
    let text = r#"
mode = "sweep_mu"

[grid]
n = 16
l = 6.0

[rho]
variant = "constant"
rho_inf = 1.0

[params]
p = 2.5

[sweep]
mu_values = [0.5, 0.75, 1.0]

[output]
directory = "out"
"#;
    let cfg = parse_config(text).unwrap();
    let back = parse_config(&serialize_config(&cfg)).unwrap();
    assert_eq!(back, cfg);
}
