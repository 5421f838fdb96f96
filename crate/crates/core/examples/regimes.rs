//! Coexistence state, competition regime and (α, β) for the bundled presets,
//! all in exact rational arithmetic.

use skt::model::{classify_regime, coexistence_state, preset};

fn main() {
    for i in 1..=4 {
        let p = preset(i).unwrap();
        let eq = coexistence_state(&p);
        let r = classify_regime(&p);
        let star = eq.admissible().map_or("none".to_string(), |s| format!("({}, {})", s.u, s.v));
        let sign = |x: &Option<num::BigRational>| match x {
            Some(x) if *x > num::zero() => "+",
            Some(x) if *x < num::zero() => "-",
            Some(_) => "0",
            None => "?",
        };
        println!(
            "preset {i}: (u*, v*) = {star}, {} competition, case {}, alpha = {}, beta = {}, signs ({}, {})",
            r.regime,
            r.case,
            r.alpha.as_ref().unwrap(),
            r.beta.as_ref().unwrap(),
            sign(&r.alpha),
            sign(&r.beta)
        );
    }
}
