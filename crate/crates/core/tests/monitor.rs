mod common;

use common::{brute_force, random_values, rng, values_trace, Gen, TICKS};
use conforma::stl::{evaluate, parse_formula, Expr, Formula, Interval, Node};
use conforma::Trace32;
use proptest::prelude::*;

const H: f64 = 0.5;

fn case(seed: u64) -> (Gen, Vec<(i32, i32)>) {
    let mut r = rng(seed);
    let g = Gen::random(&mut r, 3);
    let values = random_values(&mut r, g.horizon() as usize + 4);
    (g, values)
}

fn formula(text: &str) -> Formula<f64> {
    parse_formula(text, &["x", "y"], &[]).unwrap().instantiate(&[]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn agrees_with_grid_oracle_at_every_start(seed in any::<u64>()) {
        let (g, values) = case(seed);
        let trace = values_trace(&values, H);
        let f = g.to_formula(H);
        let oracle = brute_force(&g, &values);
        let len = (values.len() as i64 - 1) * TICKS;
        // on-sample starts and starts strictly inside a period
        for t in (0..=len - i64::from(g.horizon()) * TICKS).step_by(5) {
            let t0 = t as f64 * H / TICKS as f64;
            prop_assert_eq!(evaluate(&f, &trace, t0).unwrap(), oracle[t as usize], "t0 = {}", t0);
        }
    }

    #[test]
    fn single_precision_matches_double(seed in any::<u64>()) {
        let (g, values) = case(seed);
        let t64 = values_trace(&values, H);
        let t32 = Trace32::new(
            t64.variables().to_vec(),
            t64.timestamps().iter().map(|&t| t as f32).collect(),
            values.iter().map(|&(x, y)| vec![x as f32, y as f32]).collect(),
        ).unwrap();
        let f32_formula = Formula::new(to_f32(&g.to_node(H)), vec!["x".into(), "y".into()]);
        prop_assert_eq!(
            evaluate(&g.to_formula(H), &t64, 0.0).unwrap(),
            evaluate(&f32_formula, &t32, 0.0).unwrap()
        );
    }

    #[test]
    fn derived_operators_match_their_definitions(seed in any::<u64>(), a in 0u8..4, w in 0u8..4) {
        let trace = values_trace(&random_values(&mut rng(seed), 6), H);
        let (a, b) = (f64::from(a) * 0.25, f64::from(a + w) * 0.25);
        let ev = |f: &Formula<f64>| evaluate(f, &trace, 0.0).unwrap();
        let p = || Node::atom(Expr::Signal(0));
        let q = || Node::atom(Expr::Sub(Box::new(Expr::Signal(1)), Box::new(Expr::Const(1.0))));
        let mk = |n: Node<f64>| Formula::new(n, vec!["x".into(), "y".into()]);
        let i = Interval::new(a, b);

        let f = formula(&format!("F[{a},{b}](x > 0)"));
        prop_assert_eq!(ev(&f), ev(&mk(Node::until(i, Node::tt(), p()))));
        let g = formula(&format!("G[{a},{b}](x > 0)"));
        prop_assert_eq!(ev(&g), ev(&mk(Node::not(Node::until(i, Node::tt(), Node::not(p()))))));
        prop_assert_eq!(ev(&g), !ev(&formula(&format!("F[{a},{b}](!(x > 0))"))));
        let or = formula("x > 0 || y > 1");
        prop_assert_eq!(ev(&or), ev(&mk(Node::not(Node::and(Node::not(p()), Node::not(q()))))));
        let imp = formula("x > 0 -> y > 1");
        prop_assert_eq!(ev(&imp), !ev(&mk(p())) || ev(&mk(q())));
        prop_assert_eq!(ev(&mk(Node::not(Node::not(p())))), ev(&mk(p())));
    }
}

fn to_f32(n: &Node<f64>) -> Node<f32> {
    fn expr(e: &Expr<f64>) -> Expr<f32> {
        match e {
            Expr::Signal(i) => Expr::Signal(*i),
            Expr::Const(c) => Expr::Const(*c as f32),
            Expr::Sub(a, b) => Expr::Sub(Box::new(expr(a)), Box::new(expr(b))),
            other => panic!("generator never emits {other:?}"),
        }
    }
    match n {
        Node::Atom(e) => Node::atom(expr(e)),
        Node::Not(a) => Node::not(to_f32(a)),
        Node::And(a, b) => Node::and(to_f32(a), to_f32(b)),
        Node::Until { interval, left, right } => {
            let lit = |b: &conforma::stl::Bound<f64>| match b {
                conforma::stl::Bound::Lit(v) => *v as f32,
                other => panic!("generator never emits {other:?}"),
            };
            Node::until(
                Interval::new(lit(&interval.lo), lit(&interval.hi)),
                to_f32(left),
                to_f32(right),
            )
        }
    }
}

#[test]
fn until_needs_left_operand_before_the_witness() {
    // x holds on [0, 1) only, y from 1 on
    let trace = conforma::Trace64::new(
        vec!["x".into(), "y".into()],
        vec![0.0, 1.0, 2.0, 3.0],
        vec![vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, 1.0], vec![-1.0, 1.0]],
    )
    .unwrap();
    assert!(evaluate(&formula("x > 0 U[1,2] y > 0"), &trace, 0.0).unwrap());
    assert!(!evaluate(&formula("x > 0 U[1.5,2] y > 0"), &trace, 0.0).unwrap());
    assert!(!evaluate(&formula("x > 0 U[2,1] y > 0"), &trace, 0.0).unwrap());
}
