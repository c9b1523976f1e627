//! Small categories and sites used throughout the tests, the acceptance
//! suite and the command-line tool.

use std::sync::Arc;

use crate::fincat::{ArrowId, FinCategory, Sink};
use crate::site::{sinks_from, Pretopology};

/// Poset `a -> b`.
pub fn arrow_poset() -> FinCategory {
    FinCategory::from_preorder(&["a", "b"], |x, y| x <= y).expect("poset")
}

/// Frame of opens of the two-point discrete space: `B < l, r < T`.
pub fn disc2() -> FinCategory {
    // bit 0 = left point, bit 1 = right point
    let masks = [0b00u8, 0b01, 0b10, 0b11];
    FinCategory::from_preorder(&["B", "l", "r", "T"], |x, y| masks[x] & !masks[y] == 0).expect("frame")
}

/// Three-element chain `0 < u < 1`: opens of the Sierpinski space.
pub fn chain3() -> FinCategory {
    FinCategory::from_preorder(&["0", "u", "1"], |x, y| x <= y).expect("chain")
}

/// Frame of the one-point space: `0 < 1`.
pub fn point_frame() -> FinCategory {
    FinCategory::from_preorder(&["0", "1"], |x, y| x <= y).expect("chain")
}

pub fn terminal_site() -> Pretopology {
    Pretopology::minimal(Arc::new(FinCategory::terminal()))
}

/// The arrow poset with `{a -> b}` covering `b`, closed under the
/// pretopology axioms. Not subcanonical.
pub fn arrow_site() -> Pretopology {
    let c = Arc::new(arrow_poset());
    let f = c.arrow("a->b").expect("arrow");
    Pretopology::generated(c.clone(), [Sink::singleton(&c, f)])
}

pub fn disc2_site() -> Pretopology {
    Pretopology::join_coverings(Arc::new(disc2())).expect("frame")
}

pub fn chain3_site() -> Pretopology {
    Pretopology::join_coverings(Arc::new(chain3())).expect("frame")
}

pub fn point_site() -> Pretopology {
    Pretopology::join_coverings(Arc::new(point_frame())).expect("frame")
}

/// Values of a function of `FinCategory::finite_sets`, read off its name.
pub fn set_function(c: &FinCategory, f: ArrowId) -> Vec<usize> {
    let name = c.arrow_name(f);
    let img = name.split_once(':').map_or("", |(_, i)| i);
    img.chars().map(|ch| ch.to_digit(10).expect("finite set function name") as usize).collect()
}

/// Epi sinks of finite sets: families of functions jointly hitting every
/// element.
pub fn jointly_surjective(c: &FinCategory, s: &Sink) -> bool {
    let size: usize = c.object_name(s.apex).parse().expect("finite set");
    let mut hit = vec![false; size];
    for &u in &s.legs {
        for v in set_function(c, u) {
            hit[v] = true;
        }
    }
    hit.iter().all(|&h| h)
}

/// Sets of size at most `n` covered by jointly surjective families of
/// injections.
pub fn sets_site(n: usize) -> Pretopology {
    let c = Arc::new(FinCategory::finite_sets(n));
    let mut coverings = Vec::new();
    for x in c.objects() {
        let injections: Vec<ArrowId> = c
            .arrows_into(x)
            .filter(|&f| c.is_mono(f))
            .collect();
        coverings.extend(sinks_from(x, &injections).into_iter().filter(|s| jointly_surjective(&c, s)));
    }
    Pretopology::new(c, coverings)
}

/// The three frame-like fixtures on which operator laws are checked.
pub fn operator_fixtures() -> Vec<(&'static str, Pretopology)> {
    vec![("arrow", arrow_site()), ("disc2", disc2_site()), ("chain3", chain3_site())]
}
