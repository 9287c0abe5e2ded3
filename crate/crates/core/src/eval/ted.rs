use crate::syntax::ConstituencyTree;

/// Postorder view of a tree: labels and leftmost-leaf indices.
struct Postorder<'a> {
    labels: Vec<&'a str>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Postorder<'a> {
    fn new(tree: &'a ConstituencyTree) -> Self {
        fn walk<'a>(t: &'a ConstituencyTree, labels: &mut Vec<&'a str>, leftmost: &mut Vec<usize>) -> usize {
            let mut first = None;
            for c in &t.children {
                let l = walk(c, labels, leftmost);
                first.get_or_insert(l);
            }
            let idx = labels.len();
            labels.push(&t.label);
            let l = first.unwrap_or(idx);
            leftmost.push(l);
            l
        }
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        walk(tree, &mut labels, &mut leftmost);
        // A keyroot is the highest node sharing its leftmost leaf.
        let n = labels.len();
        let mut keyroots: Vec<usize> = (0..n)
            .filter(|&i| !(i + 1..n).any(|j| leftmost[j] == leftmost[i]))
            .collect();
        keyroots.sort_unstable();
        Self {
            labels,
            leftmost,
            keyroots,
        }
    }
}

/// Unit-cost ordered tree edit distance (insert, delete, relabel) by the
/// Zhang-Shasha keyroot dynamic program.
pub fn ted(a: &ConstituencyTree, b: &ConstituencyTree) -> usize {
    let (ta, tb) = (Postorder::new(a), Postorder::new(b));
    let (n, m) = (ta.labels.len(), tb.labels.len());
    let mut tree = vec![vec![0usize; m]; n];
    let mut forest = vec![vec![0usize; m + 1]; n + 1];
    for &i in &ta.keyroots {
        for &j in &tb.keyroots {
            let (li, lj) = (ta.leftmost[i], tb.leftmost[j]);
            // forest[x][y]: distance between the forests ta[li..li+x) and tb[lj..lj+y).
            forest[0][0] = 0;
            for x in 1..=i - li + 1 {
                forest[x][0] = forest[x - 1][0] + 1;
            }
            for y in 1..=j - lj + 1 {
                forest[0][y] = forest[0][y - 1] + 1;
            }
            for x in 1..=i - li + 1 {
                let di = li + x - 1;
                for y in 1..=j - lj + 1 {
                    let dj = lj + y - 1;
                    let del = forest[x - 1][y] + 1;
                    let ins = forest[x][y - 1] + 1;
                    if ta.leftmost[di] == li && tb.leftmost[dj] == lj {
                        let relabel = usize::from(ta.labels[di] != tb.labels[dj]);
                        forest[x][y] = del.min(ins).min(forest[x - 1][y - 1] + relabel);
                        tree[di][dj] = forest[x][y];
                    } else {
                        let px = ta.leftmost[di] - li;
                        let py = tb.leftmost[dj] - lj;
                        forest[x][y] = del.min(ins).min(forest[px][py] + tree[di][dj]);
                    }
                }
            }
        }
    }
    tree[n - 1][m - 1]
}

/// Per-sentence mean and minimum distance to the references, each averaged
/// over the corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TedSummary {
    pub mean_of_means: f64,
    pub mean_of_minima: f64,
}

pub fn ted_corpus(
    hypotheses: &[ConstituencyTree],
    references: &[Vec<ConstituencyTree>],
) -> crate::Result<TedSummary> {
    if hypotheses.len() != references.len() {
        return Err(crate::Error::shape("ted", &[hypotheses.len()], &[references.len()]));
    }
    if hypotheses.is_empty() || references.iter().any(Vec::is_empty) {
        return Err(crate::Error::Empty("tree references"));
    }
    let (mut means, mut minima) = (0.0, 0.0);
    for (h, refs) in hypotheses.iter().zip(references) {
        let d: Vec<usize> = refs.iter().map(|r| ted(h, r)).collect();
        means += d.iter().sum::<usize>() as f64 / d.len() as f64;
        minima += *d.iter().min().expect("non-empty") as f64;
    }
    let n = hypotheses.len() as f64;
    Ok(TedSummary {
        mean_of_means: means / n,
        mean_of_minima: minima / n,
    })
}
