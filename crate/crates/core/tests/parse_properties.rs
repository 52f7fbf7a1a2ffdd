mod common;

use common::*;
use proptest::prelude::*;

use nlsylv::expr::parse_poly;

const VARS: [&str; 3] = ["x1", "x2", "e1"];

proptest! {
    #![proptest_config(config(256, 0x5eed_0002))]

    #[test]
    fn serialize_then_parse_is_identity(p in poly(3, 4, 7)) {
        let text = p.to_expr(&VARS);
        let back = parse_poly::<f64, _>(&text, &VARS).unwrap();
        prop_assert_eq!(back, p, "{}", text);
    }

    #[test]
    fn f32_round_trip(p in real_poly(2, 3, 5)) {
        let p32 = nlsylv::Polynomial32::from_terms(
            2,
            p.terms().map(|(m, c)| (m.exps().to_vec(), num_complex::Complex::new(c.re as f32, c.im as f32))),
        ).unwrap();
        let text = p32.to_expr(&["a", "b"]);
        prop_assert_eq!(parse_poly::<f32, _>(&text, &["a", "b"]).unwrap(), p32);
    }

    #[test]
    fn arbitrary_text_never_panics(src in "\\PC{0,40}") {
        if let Err(e) = parse_poly::<f64, _>(&src, &VARS) {
            prop_assert!(e.offset <= src.len());
        }
    }

    #[test]
    fn grammar_shaped_text_never_panics(src in "[x12e +*/^()i.0-9-]{0,40}") {
        match parse_poly::<f64, _>(&src, &VARS) {
            Ok(p) => prop_assert_eq!(p.num_vars(), 3),
            Err(e) => prop_assert!(e.offset <= src.len()),
        }
    }
}

#[test]
fn deep_input_is_rejected() {
    let src = "(".repeat(10_000);
    assert!(parse_poly::<f64, _>(&src, &VARS).is_err());
}
