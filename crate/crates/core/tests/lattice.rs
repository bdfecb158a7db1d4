use mtt_core::terms::{Pattern, SymbolClass, TermId, TermStore};
use proptest::prelude::*;

/// A tree skeleton: `Hole` is `⊤` in patterns and an inner-alphabet subtree
/// in mixed trees.
#[derive(Debug, Clone)]
enum Skel {
    Hole(u8),
    Node(u8, Vec<Skel>),
}

fn skel() -> impl Strategy<Value = Skel> {
    let leaf = prop_oneof![
        (0u8..3).prop_map(Skel::Hole),
        (0u8..2).prop_map(|i| Skel::Node(i, Vec::new())),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|c| Skel::Node(0, vec![c])),
            (inner.clone(), inner).prop_map(|(a, b)| Skel::Node(0, vec![a, b])),
        ]
    })
}

fn out_sym(s: &mut TermStore, arity: usize, i: u8) -> mtt_core::terms::SymId {
    let name = match (arity, i) {
        (0, 0) => "c",
        (0, _) => "e",
        (1, _) => "m",
        _ => "k",
    };
    s.symbol(name, arity, SymbolClass::Output).unwrap()
}

fn pattern(s: &mut TermStore, k: &Skel) -> TermId {
    match k {
        Skel::Hole(_) => s.top(),
        Skel::Node(i, kids) => {
            let f = out_sym(s, kids.len(), *i);
            let ids: Vec<TermId> = kids.iter().map(|c| pattern(s, c)).collect();
            s.intern(f, &ids).unwrap()
        }
    }
}

fn mixed(s: &mut TermStore, k: &Skel) -> TermId {
    match k {
        Skel::Hole(i) => {
            let z = s.symbol("z", 0, SymbolClass::Inner).unwrap();
            let succ = s.symbol("s", 1, SymbolClass::Inner).unwrap();
            let mut t = s.leaf(z);
            for _ in 0..*i {
                t = s.intern(succ, &[t]).unwrap();
            }
            t
        }
        Skel::Node(i, kids) => {
            let f = out_sym(s, kids.len(), *i);
            let ids: Vec<TermId> = kids.iter().map(|c| mixed(s, c)).collect();
            s.intern(f, &ids).unwrap()
        }
    }
}

fn pat(s: &mut TermStore, k: &Option<Skel>) -> Pattern {
    match k {
        None => Pattern::Bottom,
        Some(k) => Pattern::Tree(pattern(s, k)),
    }
}

fn maybe_skel() -> impl Strategy<Value = Option<Skel>> {
    prop_oneof![1 => Just(None), 6 => skel().prop_map(Some)]
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn join_is_commutative_idempotent_and_associative(a in maybe_skel(), b in maybe_skel(), c in maybe_skel()) {
        let mut s = TermStore::new();
        let (a, b, c) = (pat(&mut s, &a), pat(&mut s, &b), pat(&mut s, &c));
        prop_assert_eq!(s.pattern_join(a, b), s.pattern_join(b, a));
        prop_assert_eq!(s.pattern_join(a, a), a);
        let ab = s.pattern_join(a, b);
        let bc = s.pattern_join(b, c);
        prop_assert_eq!(s.pattern_join(ab, c), s.pattern_join(a, bc));
    }

    #[test]
    fn join_is_least_upper_bound(a in maybe_skel(), b in maybe_skel(), c in maybe_skel()) {
        let mut s = TermStore::new();
        let (a, b, c) = (pat(&mut s, &a), pat(&mut s, &b), pat(&mut s, &c));
        let j = s.pattern_join(a, b);
        prop_assert!(s.pattern_leq(a, j));
        prop_assert!(s.pattern_leq(b, j));
        if s.pattern_leq(a, c) && s.pattern_leq(b, c) {
            prop_assert!(s.pattern_leq(j, c));
        }
        prop_assert_eq!(s.pattern_leq(a, b), s.pattern_join(a, b) == b);
    }

    #[test]
    fn bottom_and_top_are_extremes(a in skel()) {
        let mut s = TermStore::new();
        let a = Pattern::Tree(pattern(&mut s, &a));
        let top = s.top_pattern();
        prop_assert_eq!(s.pattern_join(a, Pattern::Bottom), a);
        prop_assert_eq!(s.pattern_join(a, top), top);
        prop_assert!(s.pattern_leq(Pattern::Bottom, a));
        prop_assert!(s.pattern_leq(a, top));
    }

    #[test]
    fn decomposition_round_trip(k in skel()) {
        let mut s = TermStore::new();
        let t = mixed(&mut s, &k);
        let (p, residuals) = s.prefix_decompose(t);
        let Pattern::Tree(p) = p else { panic!("decomposition never yields bottom") };
        prop_assert_eq!(s.count_tops(p), residuals.len());
        for &r in &residuals {
            prop_assert_ne!(s.class_of(r), SymbolClass::Output);
        }
        prop_assert_eq!(s.fill_tops(p, &residuals), t);
    }

    #[test]
    fn equal_trees_share_one_node(k in skel()) {
        let mut s = TermStore::new();
        let a = pattern(&mut s, &k);
        let before = s.len();
        let b = pattern(&mut s, &k);
        prop_assert_eq!(a, b);
        prop_assert_eq!(s.len(), before);
    }
}
