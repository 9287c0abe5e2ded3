//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use sacg_core::syntax::ConstituencyTree;

/// Every ordered tree shape with exactly `n` nodes, as child-count lists in
/// preorder.
fn shapes(n: usize) -> Vec<Vec<usize>> {
    fn forests(k: usize) -> Vec<Vec<Vec<usize>>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for first in 1..=k {
            for t in shapes(first) {
                for rest in forests(k - first) {
                    let mut f = vec![t.clone()];
                    f.extend(rest);
                    out.push(f);
                }
            }
        }
        out
    }
    forests(n - 1)
        .into_iter()
        .map(|f| {
            let mut pre = vec![f.len()];
            for t in f {
                pre.extend(t);
            }
            pre
        })
        .collect()
}

fn build(pre: &[usize], labels: &[&str], pos: &mut usize) -> ConstituencyTree {
    let k = pre[*pos];
    let label = labels[*pos];
    *pos += 1;
    let children = (0..k).map(|_| build(pre, labels, pos)).collect();
    ConstituencyTree::node(label, children)
}

/// All ordered labeled trees with `1..=max_nodes` nodes over `alphabet`.
pub fn all_trees(max_nodes: usize, alphabet: &[&'static str]) -> Vec<ConstituencyTree> {
    let mut out = Vec::new();
    for n in 1..=max_nodes {
        for shape in shapes(n) {
            let combos = alphabet.len().pow(n as u32);
            for mut code in 0..combos {
                let labels: Vec<&str> = (0..n)
                    .map(|_| {
                        let l = alphabet[code % alphabet.len()];
                        code /= alphabet.len();
                        l
                    })
                    .collect();
                out.push(build(&shape, &labels, &mut 0));
            }
        }
    }
    out
}

/// Random ordered tree with between 1 and `max_nodes` nodes.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize, alphabet: &[&str]) -> ConstituencyTree {
    let n = rng.gen_range(1..=max_nodes);
    // Attach node k to a random node on the rightmost path, which yields a
    // valid preorder.
    let mut parent = vec![usize::MAX; n];
    let mut path = vec![0usize];
    for k in 1..n {
        let depth = rng.gen_range(0..path.len());
        path.truncate(depth + 1);
        parent[k] = path[depth];
        path.push(k);
    }
    let labels: Vec<&str> = (0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
    fn make(i: usize, parent: &[usize], labels: &[&str]) -> ConstituencyTree {
        let kids = (0..parent.len())
            .filter(|&k| parent[k] == i)
            .map(|k| make(k, parent, labels))
            .collect();
        ConstituencyTree::node(labels[i], kids)
    }
    make(0, &parent, &labels)
}

struct Flat {
    labels: Vec<String>,
    /// `anc[i][j]`: node `i` is a proper ancestor of node `j` (preorder ids).
    anc: Vec<Vec<bool>>,
}

fn flatten(t: &ConstituencyTree) -> Flat {
    fn walk(t: &ConstituencyTree, stack: &mut Vec<usize>, labels: &mut Vec<String>, pairs: &mut Vec<(usize, usize)>) {
        let id = labels.len();
        labels.push(t.label.clone());
        for &a in stack.iter() {
            pairs.push((a, id));
        }
        stack.push(id);
        for c in &t.children {
            walk(c, stack, labels, pairs);
        }
        stack.pop();
    }
    let (mut labels, mut pairs) = (Vec::new(), Vec::new());
    walk(t, &mut Vec::new(), &mut labels, &mut pairs);
    let n = labels.len();
    let mut anc = vec![vec![false; n]; n];
    for (a, d) in pairs {
        anc[a][d] = true;
    }
    Flat { labels, anc }
}

/// Minimum-cost edit mapping found by exhaustive search over every partial
/// one-to-one node mapping that preserves ancestry and preorder.
pub fn brute_ted(a: &ConstituencyTree, b: &ConstituencyTree) -> usize {
    let (fa, fb) = (flatten(a), flatten(b));
    let (n, m) = (fa.labels.len(), fb.labels.len());
    let mut best = n + m;
    let mut pairs: Vec<(usize, usize)> = Vec::new();

    fn search(
        i: usize,
        next_j: usize,
        mismatches: usize,
        fa: &Flat,
        fb: &Flat,
        pairs: &mut Vec<(usize, usize)>,
        best: &mut usize,
    ) {
        let (n, m) = (fa.labels.len(), fb.labels.len());
        if i == n {
            let k = pairs.len();
            *best = (*best).min(n + m - 2 * k + mismatches);
            return;
        }
        search(i + 1, next_j, mismatches, fa, fb, pairs, best);
        for j in next_j..m {
            let ok = pairs
                .iter()
                .all(|&(pi, pj)| fa.anc[pi][i] == fb.anc[pj][j]);
            if !ok {
                continue;
            }
            pairs.push((i, j));
            let mm = mismatches + usize::from(fa.labels[i] != fb.labels[j]);
            search(i + 1, j + 1, mm, fa, fb, pairs, best);
            pairs.pop();
        }
    }
    search(0, 0, 0, &fa, &fb, &mut pairs, &mut best);
    best
}

/// One graph convolution evaluated node by node:
/// `h'_i = σ(Σ_j A_ij · (h_j W) + b)`.
pub fn gcn_per_node(h: &Array2<f64>, a: &Array2<f64>, w: &Array2<f64>, b: &[f64], act: impl Fn(f64) -> f64) -> Array2<f64> {
    let n = h.nrows();
    let (d_in, d_out) = w.dim();
    let mut out = Array2::zeros((n, d_out));
    for i in 0..n {
        for o in 0..d_out {
            let mut s = b[o];
            for j in 0..n {
                if a[[i, j]] == 0.0 {
                    continue;
                }
                let mut hw = 0.0;
                for k in 0..d_in {
                    hw += h[[j, k]] * w[[k, o]];
                }
                s += a[[i, j]] * hw;
            }
            out[[i, o]] = act(s);
        }
    }
    out
}
