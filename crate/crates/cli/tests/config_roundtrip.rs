use proptest::prelude::*;

use vrpl_cli::config::RunConfig;

fn algorithm() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("pl"), Just("spl"), Just("svrpl"), Just("sarahpl")]
}

proptest! {
    #[test]
    fn serialize_parse_round_trip(
        alg in algorithm(),
        m in 1e-3f64..1e3,
        k in 1usize..50,
        tau in 1usize..50,
        g in 1usize..500,
        j in 1usize..500,
        shared in any::<bool>(),
        seed in any::<u64>(),
        grid in prop::collection::vec(1e-2f64..1e2, 0..4),
    ) {
        let mut c = RunConfig::default();
        c.set("algorithm", alg).unwrap();
        c.set("M", &format!("{m:?}")).unwrap();
        c.set("K", &k.to_string()).unwrap();
        c.set("tau", &tau.to_string()).unwrap();
        c.set("inner_g", &g.to_string()).unwrap();
        c.set("inner_j", &j.to_string()).unwrap();
        c.set("shared", &shared.to_string()).unwrap();
        c.set("seed", &seed.to_string()).unwrap();
        if !grid.is_empty() {
            let list: Vec<String> = grid.iter().map(|v| format!("{v:?}")).collect();
            c.set("m_grid", &list.join(",")).unwrap();
        }
        let back = RunConfig::parse_text(&c.serialize()).unwrap();
        prop_assert_eq!(back, c);
    }
}
