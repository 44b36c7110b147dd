use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repnet_core::game::{NetworkState, Pair, PlayerId};
use repnet_core::netmetrics::{
    betweenness, homophily, homophily_indices, local_clustering, normalized_betweenness, TypeLabel,
};

use crate::Verdict;

const TOL: f64 = 1e-9;

/// Adjacency matrix from an edge list.
fn matrix(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut m = vec![vec![false; n]; n];
    for &(a, b) in edges {
        m[a][b] = true;
        m[b][a] = true;
    }
    m
}

/// Every simple path from `s` to `t`, by depth-first enumeration.
fn simple_paths(m: &[Vec<bool>], s: usize, t: usize) -> Vec<Vec<usize>> {
    fn go(m: &[Vec<bool>], at: usize, t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if at == t {
            out.push(path.clone());
            return;
        }
        for next in 0..m.len() {
            if m[at][next] && !path.contains(&next) {
                path.push(next);
                go(m, next, t, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(m, s, t, &mut vec![s], &mut out);
    out
}

/// Betweenness as the sum over unordered pairs {s,t} of the share of
/// shortest s-t paths passing through v, counted with exact fractions.
fn brute_betweenness(m: &[Vec<bool>]) -> Vec<f64> {
    let n = m.len();
    let mut out = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let paths = simple_paths(m, s, t);
            let Some(best) = paths.iter().map(Vec::len).min() else { continue };
            let shortest: Vec<&Vec<usize>> = paths.iter().filter(|p| p.len() == best).collect();
            for (v, slot) in out.iter_mut().enumerate() {
                if v == s || v == t {
                    continue;
                }
                let through = shortest.iter().filter(|p| p.contains(&v)).count();
                *slot += through as f64 / shortest.len() as f64;
            }
        }
    }
    out
}

fn brute_clustering(m: &[Vec<bool>], v: usize) -> Option<f64> {
    let nb: Vec<usize> = (0..m.len()).filter(|&u| m[v][u]).collect();
    if nb.len() < 2 {
        return None;
    }
    let (mut closed, mut pairs) = (0, 0);
    for i in 0..nb.len() {
        for j in i + 1..nb.len() {
            pairs += 1;
            closed += m[nb[i]][nb[j]] as usize;
        }
    }
    Some(closed as f64 / pairs as f64)
}

/// (H, IH) straight from the definitions: w is the type's share, s and o
/// the mean same-type and cross-type neighbor counts of its members.
fn brute_homophily(m: &[Vec<bool>], labels: &[TypeLabel], ty: TypeLabel) -> (Option<f64>, Option<f64>) {
    let n = m.len();
    let members: Vec<usize> = (0..n).filter(|&i| labels[i] == ty).collect();
    if members.is_empty() {
        return (None, None);
    }
    let w = members.len() as f64 / n as f64;
    let mut s = 0.0;
    let mut o = 0.0;
    for &i in &members {
        for j in 0..n {
            if m[i][j] {
                if labels[j] == ty {
                    s += 1.0;
                } else {
                    o += 1.0;
                }
            }
        }
    }
    s /= members.len() as f64;
    o /= members.len() as f64;
    if s + o == 0.0 {
        return (None, None);
    }
    let h = s / (s + o);
    (Some(h), (w < 1.0).then(|| (h - w) / (1.0 - w)))
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= TOL,
        _ => false,
    }
}

fn network(n: usize, edges: &[(usize, usize)]) -> NetworkState {
    NetworkState::from_pairs(n, edges.iter().map(|&(a, b)| Pair::new(PlayerId(a), PlayerId(b)).expect("distinct")))
        .expect("valid pairs")
}

/// Compares every measure on one graph; returns a description of the first
/// disagreement.
fn compare(n: usize, edges: &[(usize, usize)], labels: &[TypeLabel]) -> Result<(), String> {
    let net = network(n, edges);
    let m = matrix(n, edges);
    let bb = brute_betweenness(&m);
    let got = betweenness(&net);
    let norm = normalized_betweenness(&net);
    for v in 0..n {
        let deg = m[v].iter().filter(|&&x| x).count();
        if net.degree(PlayerId(v)) != deg {
            return Err(format!("degree of {v}"));
        }
        if (got[v] - bb[v]).abs() > TOL {
            return Err(format!("betweenness of {v}: {} vs {}", got[v], bb[v]));
        }
        let scale = if n >= 3 { ((n - 1) * (n - 2) / 2) as f64 } else { 1.0 };
        let want_norm = if n >= 3 { bb[v] / scale } else { 0.0 };
        if (norm[v] - want_norm).abs() > TOL {
            return Err(format!("normalized betweenness of {v}"));
        }
        if !close(local_clustering(&net, PlayerId(v)), brute_clustering(&m, v)) {
            return Err(format!("clustering of {v}"));
        }
    }
    for ty in [TypeLabel::TypeC, TypeLabel::TypeD] {
        let h = homophily(&net, labels, ty);
        let (bh, bih) = brute_homophily(&m, labels, ty);
        if !close(h.h, bh) || !close(h.ih, bih) {
            return Err(format!("homophily of {ty:?}: ({:?}, {:?}) vs ({bh:?}, {bih:?})", h.h, h.ih));
        }
    }
    Ok(())
}

fn fixtures() -> Result<(), String> {
    let all_c = |n| vec![TypeLabel::TypeC; n];
    let path: Vec<(usize, usize)> = (0..4).map(|i| (i, i + 1)).collect();
    let star: Vec<(usize, usize)> = (1..5).map(|i| (0, i)).collect();
    let complete: Vec<(usize, usize)> = (0..5).flat_map(|a| (a + 1..5).map(move |b| (a, b))).collect();
    let expect = |name: &str, got: Vec<f64>, want: &[f64]| {
        if got.iter().zip(want).all(|(g, w)| (g - w).abs() <= TOL) {
            Ok(())
        } else {
            Err(format!("{name}: {got:?} vs {want:?}"))
        }
    };
    expect("path betweenness", betweenness(&network(5, &path)), &[0.0, 3.0, 4.0, 3.0, 0.0])?;
    expect("star betweenness", betweenness(&network(5, &star)), &[6.0, 0.0, 0.0, 0.0, 0.0])?;
    expect("complete betweenness", betweenness(&network(5, &complete)), &[0.0; 5])?;
    let k5 = network(5, &complete);
    if !(0..5).all(|v| local_clustering(&k5, PlayerId(v)) == Some(1.0)) {
        return Err("complete clustering".into());
    }
    let s = network(5, &star);
    if local_clustering(&s, PlayerId(0)) != Some(0.0) || local_clustering(&s, PlayerId(1)).is_some() {
        return Err("star clustering".into());
    }
    for (n, edges) in [(5, &path), (5, &star), (5, &complete)] {
        compare(n, edges, &all_c(n))?;
    }
    // Worked example: w = 7/12, s = 3, o = 1 gives H = 0.75 and IH = 0.4.
    let (h, ih) = homophily_indices(7.0 / 12.0, 3.0, 1.0);
    if !close(h, Some(0.75)) || !close(ih, Some(0.4)) {
        return Err(format!("worked homophily example: {h:?} {ih:?}"));
    }
    Ok(())
}

pub fn run() -> Verdict {
    if let Err(e) = fixtures() {
        return Verdict::new(false, format!("fixture: {e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    for g in 0..200 {
        let n = rng.random_range(2..=8);
        let density: f64 = rng.random_range(0.1..0.9);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(density) {
                    edges.push((a, b));
                }
            }
        }
        let labels: Vec<TypeLabel> =
            (0..n).map(|_| if rng.random_bool(0.5) { TypeLabel::TypeC } else { TypeLabel::TypeD }).collect();
        if let Err(e) = compare(n, &edges, &labels) {
            return Verdict::new(false, format!("graph {g} (n={n}, {} edges): {e}", edges.len()));
        }
    }
    Verdict::new(true, "200 random graphs (n <= 8) and path/star/complete fixtures agree with brute force within 1e-9")
}
