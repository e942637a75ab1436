//! Exact-rational symbolic expression kernel: parsing, canonical polynomial
//! form, differentiation, substitution, and a restricted extended form
//! (rational powers, exp, ln, opaque applications) for flows and invariants.
//!
//! Everything here is immutable after construction and safe to share across
//! threads; every operation is a pure function.

pub mod expr;
pub mod parse;
pub mod poly;
pub mod print;
pub mod rational;
pub mod symbol;

pub use expr::{
    add, add2, diff, equal_extended, eval_f64, exp_of, free_symbols, func, ln_of, mul, mul2, neg,
    normalize_extended, pow_int, pow_rat, sub, substitute, EvalError, Expr, FuncApp,
};
pub use parse::{parse_expr, parse_rational, ParseError};
pub use poly::{frac_equal, poly_equal, poly_normalize, varset, Frac, Mono, NonPolynomial, PolyForm, VarSet};
pub use rational::{rat, rat_int, Rat};
pub use symbol::{Symbol, SymbolContext, SymbolKind};

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;

    fn rnc_ctx() -> SymbolContext {
        let mut c = SymbolContext::new();
        c.add_independent("x");
        c.add_independent("y");
        c.add_dependent("u");
        c.add_dependent("v");
        c.add_dependent("theta");
        c.add_parameter("Gr");
        c.add_parameter("Pr");
        c.add_parameter("R");
        c.add_parameter("calpha");
        c.add_symbol("h", SymbolKind::GroupParam);
        c.add_alias("t", "theta");
        c.add_function("F1");
        c
    }

    #[test]
    fn parse_momentum_equation_shape() {
        let ctx = rnc_ctx();
        let e = parse_expr("u*u_x + v*u_y - u_yy - Gr*calpha*theta", &ctx).unwrap();
        let syms = free_symbols(&e);
        for name in ["u", "u_x", "u_y", "u_yy", "theta", "Gr", "calpha", "v"] {
            assert!(syms.contains(&ctx.resolve(name).unwrap()), "missing {name}");
        }
        // parse -> print -> reparse is a fixpoint on the polynomial subset
        let printed = e.to_string();
        let again = parse_expr(&printed, &ctx).unwrap();
        assert!(poly_equal(&e, &again).unwrap());
    }

    #[test]
    fn parse_power_and_rational_literal() {
        let ctx = rnc_ctx();
        let e = parse_expr("x^2 - 1/2", &ctx).unwrap();
        match &e {
            Expr::Sum(terms) => {
                assert_eq!(terms.len(), 2);
                assert!(matches!(&terms[0], Expr::IntPow(b, 2) if matches!(&**b, Expr::Sym(s) if s.name() == "x")));
                assert_eq!(terms[1], Expr::rat(-1, 2));
            }
            other => panic!("unexpected shape {other:?}"),
        }
    }

    #[test]
    fn unknown_jet_letter_is_an_error() {
        let ctx = rnc_ctx();
        let err = parse_expr("u_xz", &ctx).unwrap_err();
        assert!(err.message.contains("u_xz"), "{}", err.message);
    }

    #[test]
    fn poly_normalize_zero_identity() {
        let ctx = rnc_ctx();
        let e = parse_expr("(x+y)^2 - x^2 - 2*x*y - y^2", &ctx).unwrap();
        assert!(poly_normalize(&e).unwrap().is_zero());
    }

    #[test]
    fn poly_normalize_jet_monomial() {
        let ctx = rnc_ctx();
        let e = parse_expr("u*u_x", &ctx).unwrap();
        let p = poly_normalize(&e).unwrap();
        assert_eq!(p.num_terms(), 1);
        let (m, c) = p.terms().next().unwrap();
        assert_eq!(m.total_degree(), 2);
        assert_eq!(c, &rat_int(1));
        // dependent u orders before jet u_x in the default symbol order
        let vars = p.vars();
        let iu = vars.iter().position(|s| s.name() == "u").unwrap();
        let iux = vars.iter().position(|s| s.name() == "u_x").unwrap();
        assert!(iu < iux);
    }

    #[test]
    fn poly_normalize_collects_like_terms() {
        let ctx = rnc_ctx();
        let e = parse_expr("2*x + 3*x", &ctx).unwrap();
        let p = poly_normalize(&e).unwrap();
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.terms().next().unwrap().1, &rat_int(5));
    }

    #[test]
    fn poly_normalize_rejects_extended_nodes() {
        let ctx = rnc_ctx();
        let e = parse_expr("exp(x)", &ctx).unwrap();
        let err = poly_normalize(&e).unwrap_err();
        assert_eq!(err.node_kind, "exp");
    }

    #[test]
    fn diff_product_and_exp() {
        let ctx = rnc_ctx();
        let x = ctx.lookup("x").unwrap();
        let h = ctx.lookup("h").unwrap();
        let e = parse_expr("x^2*u", &ctx).unwrap();
        assert!(poly_equal(&diff(&e, &x), &parse_expr("2*x*u", &ctx).unwrap()).unwrap());

        let g = parse_expr("exp(2*h)", &ctx).unwrap();
        let dg = diff(&g, &h);
        assert!(equal_extended(&dg, &mul2(Expr::int(2), g.clone())));
    }

    #[test]
    fn diff_opaque_function_chain_rule() {
        // d/dy F1(y*x^(-1/2)) = F1'(y*x^(-1/2)) * x^(-1/2),
        // cross-checked against central finite differences with F1 := sin.
        let ctx = rnc_ctx();
        let y = ctx.lookup("y").unwrap();
        let arg = parse_expr("y*x^(-1/2)", &ctx).unwrap();
        let e = func("F1", 0, arg.clone());
        let d = diff(&e, &y);
        let expected = mul2(
            func("F1", 1, arg),
            pow_rat(Expr::sym(&ctx.lookup("x").unwrap()), rat(-1, 2)).unwrap(),
        );
        assert!(equal_extended(&d, &expected));

        let bind = |xv: f64, yv: f64| {
            move |s: &Symbol| match s.name() {
                "x" => Some(xv),
                "y" => Some(yv),
                _ => None,
            }
        };
        let f1 = |_: &str, primes: u32, a: f64| -> Option<f64> {
            Some(match primes {
                0 => crate::fmath::sin(a),
                1 => crate::fmath::cos(a),
                _ => return None,
            })
        };
        for (xv, yv) in [(1.3, 0.7), (2.0, 1.5), (4.2, -0.4)] {
            let exact = eval_f64(&d, &bind(xv, yv), &f1).unwrap();
            let dh = 1e-6;
            let up = eval_f64(&e, &bind(xv, yv + dh), &f1).unwrap();
            let dn = eval_f64(&e, &bind(xv, yv - dh), &f1).unwrap();
            let fd = (up - dn) / (2.0 * dh);
            assert!(crate::fmath::abs(exact - fd) < 1e-8, "{exact} vs {fd}");
        }
    }

    #[test]
    fn substitution_is_simultaneous() {
        let ctx = rnc_ctx();
        let x = ctx.lookup("x").unwrap();
        let y = ctx.lookup("y").unwrap();

        // substitute(x+u, {x -> x*exp(h)}) = x*exp(h) + u
        let e = parse_expr("x + u", &ctx).unwrap();
        let xh = parse_expr("x*exp(h)", &ctx).unwrap();
        let mut m = BTreeMap::new();
        m.insert(x.clone(), xh.clone());
        let got = substitute(&e, &m);
        assert!(equal_extended(
            &got,
            &add2(xh, Expr::sym(&ctx.lookup("u").unwrap()))
        ));

        // substitute(u_x, {u_x -> -v_y})
        let ux = ctx.resolve("u_x").unwrap();
        let mut m2 = BTreeMap::new();
        m2.insert(ux.clone(), parse_expr("-v_y", &ctx).unwrap());
        let got2 = substitute(&Expr::sym(&ux), &m2);
        assert!(poly_equal(&got2, &parse_expr("-v_y", &ctx).unwrap()).unwrap());

        // simultaneous, not sequential: x*y under {x->y, y->x} = y*x
        let mut m3 = BTreeMap::new();
        m3.insert(x.clone(), Expr::sym(&y));
        m3.insert(y.clone(), Expr::sym(&x));
        let got3 = substitute(&parse_expr("x*y", &ctx).unwrap(), &m3);
        assert_eq!(got3.to_string(), "y*x");
        assert!(poly_equal(&got3, &parse_expr("x*y", &ctx).unwrap()).unwrap());
    }

    #[test]
    fn extended_print_roundtrip_is_structural() {
        let ctx = rnc_ctx();
        for text in [
            "x*exp(2*h)",
            "y*x^(-1/2)",
            "F1'(y*x^(-1/2))*x^(-1/2)",
            "exp(-h)*v",
            "ln(x) + y",
            "(u + v)^3",
            "x^(-2)",
        ] {
            let e = parse_expr(text, &ctx).unwrap();
            let printed = e.to_string();
            let again = parse_expr(&printed, &ctx).unwrap();
            assert_eq!(
                normalize_extended(&e),
                normalize_extended(&again),
                "round trip changed `{text}` -> `{printed}`"
            );
        }
    }

    #[test]
    fn homomorphism_on_random_pairs() {
        // normalize(a+b) = normalize(a)+normalize(b) and likewise for
        // products, over >= 1000 random polynomial pairs.
        let ctx = rnc_ctx();
        let mut rng = crate::rng::SplitMix64::new(2024);
        let names = ["x", "y", "u", "v", "theta", "Gr"];
        let random_poly = |rng: &mut crate::rng::SplitMix64| -> Expr {
            let mut terms = Vec::new();
            for _ in 0..rng.int_in(1, 4) {
                let mut factors = vec![Expr::Const(rng.small_rational())];
                for _ in 0..rng.int_in(0, 3) {
                    let s = ctx.lookup(names[rng.int_in(0, 5) as usize]).unwrap();
                    factors.push(pow_int(Expr::sym(&s), rng.int_in(1, 2)));
                }
                terms.push(mul(factors));
            }
            add(terms)
        };
        let all_vars: Vec<Symbol> = names.iter().map(|n| ctx.lookup(n).unwrap()).collect();
        let vars = varset(all_vars);
        for _ in 0..1000 {
            let a = random_poly(&mut rng);
            let b = random_poly(&mut rng);
            let pa = PolyForm::from_expr(&a, &vars).unwrap();
            let pb = PolyForm::from_expr(&b, &vars).unwrap();
            let sum = PolyForm::from_expr(&add2(a.clone(), b.clone()), &vars).unwrap();
            let prod = PolyForm::from_expr(&mul2(a, b), &vars).unwrap();
            assert_eq!(sum, pa.add(&pb));
            assert_eq!(prod, pa.mul(&pb));
        }
    }

    #[test]
    fn diff_commutes_on_polynomials() {
        let ctx = rnc_ctx();
        let x = ctx.lookup("x").unwrap();
        let y = ctx.lookup("y").unwrap();
        let mut rng = crate::rng::SplitMix64::new(99);
        for _ in 0..200 {
            let mut terms = Vec::new();
            for _ in 0..rng.int_in(1, 5) {
                terms.push(mul(vec![
                    Expr::Const(rng.small_rational()),
                    pow_int(Expr::sym(&x), rng.int_in(0, 3)),
                    pow_int(Expr::sym(&y), rng.int_in(0, 3)),
                ]));
            }
            let e = add(terms);
            let dxy = diff(&diff(&e, &x), &y);
            let dyx = diff(&diff(&e, &y), &x);
            assert!(poly_equal(&dxy, &dyx).unwrap());
        }
    }

    #[test]
    fn printing_matches_grammar_examples() {
        let ctx = rnc_ctx();
        let e = parse_expr("u*u_x + v*u_y - u_yy - Gr*calpha*theta", &ctx).unwrap();
        assert_eq!(format!("{e}"), "u*u_x + v*u_y - u_yy - Gr*calpha*theta");
    }
}

