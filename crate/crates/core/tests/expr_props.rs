//! Property tests for the expression language: print-then-parse identity
//! on random trees, and bit-exact agreement between the recursive
//! evaluator and an independent stack evaluator on random inputs.

use myers_core::expr::{BinOp, Env, Expr, Func, ScalarFieldExpr, Var};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0f64..1000.0).prop_map(Expr::Num),
        Just(Expr::Pi),
        prop_oneof![
            Just(Var::U),
            Just(Var::V),
            Just(Var::X),
            Just(Var::Y),
            Just(Var::Z)
        ]
        .prop_map(Expr::Var),
    ]
}

fn arb_expr(depth: u32) -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(depth, 64, 4, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div),
                    Just(BinOp::Pow)
                ],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| Expr::Bin(op, Box::new(l), Box::new(r))),
            (
                prop_oneof![
                    Just(Func::Sin),
                    Just(Func::Cos),
                    Just(Func::Tan),
                    Just(Func::Exp),
                    Just(Func::Log),
                    Just(Func::Sqrt),
                    Just(Func::Abs),
                    Just(Func::Cosh),
                    Just(Func::Sinh)
                ],
                inner
            )
                .prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn print_parse_roundtrip(ast in arb_expr(6)) {
        let field = ScalarFieldExpr { ast };
        let printed = field.print();
        let reparsed = ScalarFieldExpr::parse(&printed)
            .unwrap_or_else(|e| panic!("printed form `{printed}` failed to parse: {e}"));
        prop_assert_eq!(&field.ast, &reparsed.ast, "roundtrip mismatch via `{}`", printed);
    }

    #[test]
    fn recursive_and_stack_evaluators_agree_bitwise(
        ast in arb_expr(6),
        u in -3.0f64..3.0,
        v in -3.0f64..3.0,
        z in -1.0f64..1.0,
    ) {
        let field = ScalarFieldExpr { ast };
        let prog = field.compile();
        let env = Env { u, v, x: Some(0.2), y: Some(-0.4), z: Some(z) };
        let direct = field.eval(&env);
        let stacked = prog.eval(&env);
        match (direct, stacked) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits(), "{} vs {}", a, b),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "evaluators disagree: {:?} vs {:?}", a, b),
        }
    }
}
