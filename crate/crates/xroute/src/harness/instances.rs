use rand::seq::SliceRandom;
use rand::Rng;

use super::config::Pattern;
use crate::graph::Graph;
use crate::sorting::{Key, Token};

/// `(source slot, destination id)` requests with at most `cap(v)` tokens
/// leaving and entering every vertex.
pub fn routing_requests<R: Rng>(g: &Graph, pattern: Pattern, cap: &dyn Fn(usize) -> usize, rng: &mut R) -> Vec<(usize, u64)> {
    let vs = g.by_id_order(g.members());
    let mut out = Vec::new();
    match pattern {
        Pattern::ManyToOne => {
            let mut hubs = vs.clone();
            hubs.shuffle(rng);
            let mut srcs = vs.clone();
            srcs.shuffle(rng);
            let mut h = 0;
            let mut left = cap(hubs[0]);
            for s in srcs {
                if left == 0 {
                    h += 1;
                    left = cap(hubs[h]);
                }
                out.push((s, g.id(hubs[h])));
                left -= 1;
            }
        }
        Pattern::Random => {
            let mut room: Vec<usize> = vs.iter().map(|&v| cap(v)).collect();
            let mut open: Vec<usize> = (0..vs.len()).collect();
            for &s in &vs {
                let k = rng.gen_range(0..=cap(s));
                for _ in 0..k {
                    if open.is_empty() {
                        break;
                    }
                    let i = rng.gen_range(0..open.len());
                    let d = open[i];
                    out.push((s, g.id(vs[d])));
                    room[d] -= 1;
                    if room[d] == 0 {
                        open.swap_remove(i);
                    }
                }
            }
        }
        _ => {
            let mut perm = vs.clone();
            perm.shuffle(rng);
            out.extend(vs.iter().zip(&perm).map(|(&s, &d)| (s, g.id(d))));
        }
    }
    out
}

pub fn route_tokens(g: &Graph, req: &[(usize, u64)]) -> Vec<Token> {
    let _ = g;
    req.iter().enumerate().map(|(k, &(s, d))| Token { id: k as u64, tag: k as i128, at: s, dst: d, ..Default::default() }).collect()
}

/// Up to `l` keyed tokens per vertex; `Duplicates` draws keys from a small range.
pub fn sort_tokens<R: Rng>(g: &Graph, pattern: Pattern, l: usize, rng: &mut R) -> Vec<Token> {
    let mut out = Vec::new();
    let range = match pattern {
        Pattern::Duplicates => (g.n() / 8).max(2) as i64,
        _ => i64::MAX / 4,
    };
    for &v in g.members() {
        for _ in 0..rng.gen_range(0..=l) {
            let k = out.len();
            let key = rng.gen_range(-range..range);
            out.push(Token { id: k as u64, key: Key::one(key), tag: k as i128, at: v, value: rng.gen_range(-1000..1000), ..Default::default() });
        }
    }
    out
}
