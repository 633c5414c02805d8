use std::sync::OnceLock;

use proptest::prelude::*;
use ringheat::cli::parse_config;
use ringheat::convexity::{c_p, check_borell_inequality, CheckOptions};
use ringheat::dump::{decode, encode};
use ringheat::field::{ScalarField, SigmaPair};
use ringheat::geometry::{make_ring, p_mean_time, p_midpoint, BodySpec, ConvexBody};
use ringheat::oracle::{halfspace_field, HalfSpaceSolution};
use ringheat::solver::{solve_heat, GridSpec, SpaceTimeField};
use ringheat::SpaceTimePoint;

fn coarse() -> &'static SpaceTimeField {
    static F: OnceLock<SpaceTimeField> = OnceLock::new();
    F.get_or_init(|| {
        let ring = make_ring(ConvexBody::disk([0.0, 0.0], 1.0).unwrap(), ConvexBody::disk([0.05, 0.0], 0.3).unwrap()).unwrap();
        solve_heat(&ring, &GridSpec::new(0.05, 0.01, 0.2), None).unwrap()
    })
}

fn hs() -> &'static HalfSpaceSolution {
    static F: OnceLock<HalfSpaceSolution> = OnceLock::new();
    F.get_or_init(|| halfspace_field(1).unwrap())
}

fn pair(a: (f64, f64), b: (f64, f64)) -> SigmaPair {
    SigmaPair {
        x: SpaceTimePoint::at(a.0, 0.0, a.1),
        y: SpaceTimePoint::at(b.0, 0.0, b.1),
        level: f64::NAN,
        midpoint_admissible: true,
    }
}

const CONFIG: &str = include_str!("../../../configs/disks.toml");

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn p_mean_is_a_symmetric_mean_decreasing_in_p(s in 0.01f64..5.0, t in 0.01f64..5.0, p in 1.0f64..6.0, dp in 0.0f64..3.0) {
        let m = p_mean_time(s, t, p);
        prop_assert!(m >= s.min(t) * (1.0 - 1e-12) && m <= s.max(t) * (1.0 + 1e-12));
        prop_assert!((m - p_mean_time(t, s, p)).abs() <= 1e-12 * m);
        prop_assert!(p_mean_time(s, t, p + dp) <= m * (1.0 + 1e-12));
    }

    #[test]
    fn c_p_is_symmetric_and_vanishes_on_the_diagonal(
        a in (0.2f64..3.0, 0.1f64..4.0),
        b in (0.2f64..3.0, 0.1f64..4.0),
        p in 1.0f64..4.0,
    ) {
        let f = hs();
        let ab = c_p(f, &pair(a, b), p).unwrap();
        let ba = c_p(f, &pair(b, a), p).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-14);
        prop_assert_eq!(c_p(f, &pair(a, a), p).unwrap(), 0.0);
    }

    #[test]
    fn c_p_is_nondecreasing_in_p_for_time_monotone_fields(
        a in (0.2f64..3.0, 0.1f64..4.0),
        b in (0.2f64..3.0, 0.1f64..4.0),
        p in 1.0f64..4.0,
        dp in 0.0f64..2.0,
    ) {
        let f = hs();
        let q = pair(a, b);
        prop_assume!(f.is_admissible(&p_midpoint(&q.x, &q.y, p + dp)));
        prop_assert!(c_p(f, &q, p + dp).unwrap() >= c_p(f, &q, p).unwrap() - 1e-14);
    }

    #[test]
    fn dump_roundtrip_preserves_every_value(x in -0.9f64..0.9, y in -0.9f64..0.9, t in 0.0f64..0.2) {
        let f = coarse();
        static BACK: OnceLock<SpaceTimeField> = OnceLock::new();
        let g = BACK.get_or_init(|| decode(&encode(f)).unwrap());
        let p = SpaceTimePoint::at(x, y, t);
        prop_assert_eq!(f.extended_value(&p).to_bits(), g.extended_value(&p).to_bits());
        match (f.value(&p), g.value(&p)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
            (Err(a), Err(b)) => prop_assert_eq!(a.kind(), b.kind()),
            _ => prop_assert!(false, "admissibility differs after the roundtrip"),
        }
    }

    #[test]
    fn corrupted_dumps_are_rejected_without_panicking(cut in 0usize..4096, flips in proptest::collection::vec((0usize..1 << 20, any::<u8>()), 0..8)) {
        let mut bytes = encode(coarse());
        for (i, v) in flips {
            let n = bytes.len();
            bytes[i % n] ^= v;
        }
        let keep = bytes.len().saturating_sub(cut);
        bytes.truncate(keep);
        let _ = decode(&bytes);
    }

    #[test]
    fn config_parser_never_panics(text in "\\PC{0,400}") {
        let _ = parse_config(&text);
    }

    #[test]
    fn mutated_configs_never_panic(pos in 0usize..2000, insert in "[\\[\\]=\"a-z0-9.,{} \n-]{0,12}") {
        let mut s = CONFIG.to_string();
        let mut at = pos % s.len();
        while !s.is_char_boundary(at) {
            at -= 1;
        }
        s.insert_str(at, &insert);
        let _ = parse_config(&s);
    }

    #[test]
    fn body_specs_roundtrip_through_toml(cx in -1.0f64..1.0, cy in -1.0f64..1.0, a in 0.1f64..2.0, b in 0.1f64..2.0, q in 2.0f64..8.0) {
        #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
        struct Wrap { body: BodySpec }
        for body in [
            BodySpec::Disk { center: [cx, cy], radius: a },
            BodySpec::Ellipse { center: [cx, cy], semi_axes: [a, b] },
            BodySpec::Superellipse { center: [cx, cy], semi_axes: [a, b], exponent: q },
            BodySpec::Interval { lo: cx - a, hi: cx + b },
        ] {
            let w = Wrap { body };
            let text = toml::to_string(&w).unwrap();
            prop_assert_eq!(toml::from_str::<Wrap>(&text).unwrap(), w);
        }
    }

    #[test]
    fn reports_are_ranked_and_seed_deterministic(seed in 0u64..1000) {
        let f = coarse();
        let o = CheckOptions::seeded(seed);
        let r = check_borell_inequality(f, 300, &o);
        prop_assert!(r.ranked.windows(2).all(|w| w[0].value >= w[1].value));
        prop_assert_eq!(r.ranked.first().map(|e| e.value), Some(r.worst));
        prop_assert!(r.ranked.len() <= 100);
        prop_assert_eq!(r.worst_csv().lines().count(), r.ranked.len() + 1);
        prop_assert_eq!(r.canonical_json(), check_borell_inequality(f, 300, &o).canonical_json());
    }
}
