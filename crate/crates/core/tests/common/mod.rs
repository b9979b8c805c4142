//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the solver code paths it is compared against:
//! linear systems use a local Gaussian elimination, component and class
//! structure come from exhaustive enumeration, and sampling uses a ChaCha
//! generator unrelated to the simulator's.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::io::Write;

use cyclesynth::acpc::CycleModel;
use cyclesynth::automata::Ltl;
use cyclesynth::mdp::{LabeledMdp, MdpBuilder};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Writes straight to the process stderr so the line survives output capture.
pub fn verdict(criterion: u32, title: &str, failures: &[String]) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut line = format!("[criterion {criterion}] {status} {title}");
    if !failures.is_empty() {
        line.push_str(": ");
        line.push_str(&failures.join("; "));
    }
    line.push('\n');
    let _ = std::io::stderr().write_all(line.as_bytes());
}

/// Dense Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Visits every combination `idx[i] < sizes[i]` in lexicographic order.
pub fn for_each_policy(sizes: &[usize], mut f: impl FnMut(&[usize])) {
    if sizes.contains(&0) {
        return;
    }
    let mut idx = vec![0; sizes.len()];
    loop {
        f(&idx);
        let mut i = 0;
        loop {
            if i == sizes.len() {
                return;
            }
            idx[i] += 1;
            if idx[i] < sizes[i] {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Random model with `n` states over actions `a0..a{k-1}`. Each state enables
/// a random non-empty subset of the actions. With `ring`, action `a0` is
/// enabled everywhere and always has positive mass on the next state.
pub fn random_mdp(rng: &mut StdRng, n: usize, k: usize, ring: bool) -> LabeledMdp {
    let mut b = MdpBuilder::new();
    let ids: Vec<usize> = (0..n)
        .map(|i| {
            let labels: &[&str] = if i == 0 || rng.random_bool(0.3) { &["pi"] } else { &[] };
            b.state(&format!("s{i}"), labels)
        })
        .collect();
    let acts: Vec<usize> = (0..k).map(|a| b.action(&format!("a{a}"))).collect();
    for s in 0..n {
        let mut enabled: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.6)).collect();
        if ring && !enabled.contains(&0) {
            enabled.insert(0, 0);
        }
        if enabled.is_empty() {
            enabled.push(rng.random_range(0..k));
        }
        for a in enabled {
            let mut succ: BTreeSet<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(0..n)).collect();
            if ring && a == 0 {
                succ.insert((s + 1) % n);
            }
            let weights: Vec<f64> = succ.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let cost = (rng.random_range(0.0..1.0f64) * 100.0).round() / 100.0;
            for (&t, w) in succ.iter().zip(&weights) {
                b.transition(ids[s], acts[a], ids[t], w / total, cost).unwrap();
            }
        }
    }
    b.initial(ids[0]);
    b.rmax(1.0);
    b.build()
}

/// A random communicating model where every cycle passes a marker: state 0
/// is a marker, `i -> i+1` closes a ring through it, and every other edge
/// goes to a higher-numbered state or to a marker.
pub fn ranked_component(rng: &mut StdRng) -> LabeledMdp {
    let n = rng.random_range(3..=8);
    let mut b = MdpBuilder::new();
    let marker: Vec<bool> = (0..n).map(|i| i == 0 || rng.random_bool(0.25)).collect();
    let ids: Vec<usize> = (0..n)
        .map(|i| b.state(&format!("s{i}"), if marker[i] { &["pi"][..] } else { &[][..] }))
        .collect();
    let acts: Vec<usize> = (0..3).map(|a| b.action(&format!("a{a}"))).collect();
    for s in 0..n {
        for (ai, &a) in acts.iter().enumerate().take(rng.random_range(1..=3)) {
            let allowed: Vec<usize> = (0..n).filter(|&t| t > s || marker[t]).collect();
            let mut succ: BTreeSet<usize> = (0..rng.random_range(1..=3)).map(|_| allowed[rng.random_range(0..allowed.len())]).collect();
            if ai == 0 {
                succ.insert((s + 1) % n);
            }
            let w: Vec<f64> = succ.iter().map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = w.iter().sum();
            let cost = rng.random_range(0.0..1.0);
            for (&t, w) in succ.iter().zip(&w) {
                b.transition(ids[s], a, ids[t], w / total, cost).unwrap();
            }
        }
    }
    b.initial(ids[0]);
    b.rmax(1.0);
    b.build()
}

/// Successors with positive probability.
fn support(m: &LabeledMdp, s: usize, choice: usize) -> impl Iterator<Item = usize> + '_ {
    m.choices[s][choice].successors.iter().filter(|(_, p)| *p > 0.0).map(|(t, _)| *t)
}

fn closure(succ: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = succ.len();
    let mut r = vec![vec![false; n]; n];
    for i in 0..n {
        r[i][i] = true;
        for &j in &succ[i] {
            r[i][j] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

/// Maximal end components by enumerating every state subset: a subset is an
/// end component when each member keeps an action staying inside and the
/// subgraph of those actions is strongly connected. Returns `(states,
/// retained action ids)` sorted by the smallest member.
pub fn mec_oracle(m: &LabeledMdp) -> Vec<(Vec<usize>, Vec<Vec<usize>>)> {
    let n = m.num_states();
    assert!(n <= 12, "subset oracle is exponential");
    let mut ecs: Vec<u32> = Vec::new();
    for mask in 1u32..(1 << n) {
        let inside = |t: usize| mask >> t & 1 == 1;
        let members: Vec<usize> = (0..n).filter(|&s| inside(s)).collect();
        let mut succ = vec![Vec::new(); n];
        let mut ok = true;
        for &s in &members {
            let kept: Vec<usize> = (0..m.choices[s].len()).filter(|&c| support(m, s, c).all(inside)).collect();
            if kept.is_empty() {
                ok = false;
                break;
            }
            succ[s] = kept.iter().flat_map(|&c| support(m, s, c)).collect();
        }
        if !ok {
            continue;
        }
        let r = closure(&succ);
        if members.iter().all(|&i| members.iter().all(|&j| r[i][j])) {
            ecs.push(mask);
        }
    }
    let maximal: Vec<u32> = ecs.iter().copied().filter(|&e| !ecs.iter().any(|&f| f != e && f & e == e)).collect();
    let mut out: Vec<(Vec<usize>, Vec<Vec<usize>>)> = maximal
        .into_iter()
        .map(|mask| {
            let inside = |t: usize| mask >> t & 1 == 1;
            let states: Vec<usize> = (0..n).filter(|&s| inside(s)).collect();
            let actions = states
                .iter()
                .map(|&s| {
                    let mut a: Vec<usize> = (0..m.choices[s].len())
                        .filter(|&c| support(m, s, c).all(inside))
                        .map(|c| m.choices[s][c].action)
                        .collect();
                    a.sort();
                    a
                })
                .collect();
            (states, actions)
        })
        .collect();
    out.sort();
    out
}

/// Maximal probability of reaching `target` from every state, as the
/// pointwise maximum over all memoryless deterministic policies.
pub fn reach_oracle(m: &LabeledMdp, target: &[bool]) -> Vec<f64> {
    let n = m.num_states();
    let sizes: Vec<usize> = (0..n).map(|s| m.choices[s].len()).collect();
    let mut best = vec![0.0f64; n];
    for_each_policy(&sizes, |pol| {
        let succ: Vec<Vec<usize>> = (0..n).map(|s| support(m, s, pol[s]).collect()).collect();
        let r = closure(&succ);
        let can: Vec<bool> = (0..n).map(|s| (0..n).any(|t| target[t] && r[s][t])).collect();
        let unknown: Vec<usize> = (0..n).filter(|&s| !target[s] && can[s]).collect();
        let pos = |s: usize| unknown.iter().position(|&u| u == s);
        let k = unknown.len();
        let mut a = vec![vec![0.0; k]; k];
        let mut b = vec![0.0; k];
        for (i, &s) in unknown.iter().enumerate() {
            a[i][i] += 1.0;
            for &(t, p) in &m.choices[s][pol[s]].successors {
                if target[t] {
                    b[i] += p;
                } else if let Some(j) = pos(t) {
                    a[i][j] -= p;
                }
            }
        }
        let x = solve(a, b).expect("absorbing chain system is regular");
        for s in 0..n {
            let v = if target[s] { 1.0 } else { pos(s).map_or(0.0, |i| x[i]) };
            best[s] = best[s].max(v);
        }
    });
    best
}

/// Policy-induced rows of a cycle model, as dense probabilities.
fn dense_rows(cm: &CycleModel, policy: &[usize]) -> Vec<Vec<f64>> {
    let n = cm.len();
    (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            for &(j, p) in &cm.choices[i][policy[i]].successors {
                row[j] += p;
            }
            row
        })
        .collect()
}

/// Closed recurrent classes of a dense chain.
pub fn recurrent_classes(rows: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = rows.len();
    let succ: Vec<Vec<usize>> = rows.iter().map(|r| (0..n).filter(|&j| r[j] > 0.0).collect()).collect();
    let r = closure(&succ);
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if seen[i] || !(0..n).all(|j| !r[i][j] || r[j][i]) {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&j| r[i][j]).collect();
        for &j in &class {
            seen[j] = true;
        }
        out.push(class);
    }
    out
}

/// Stationary distribution of an irreducible class.
fn stationary_on(rows: &[Vec<f64>], class: &[usize]) -> Vec<f64> {
    let k = class.len();
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
    let mut a = vec![vec![0.0; k]; k];
    for (r, &j) in class.iter().enumerate() {
        for (c, &i) in class.iter().enumerate() {
            a[r][c] = rows[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[k - 1] = vec![1.0; k];
    let mut b = vec![0.0; k];
    b[k - 1] = 1.0;
    solve(a, b).expect("irreducible class")
}

/// Cost per cycle of every recurrent class of `policy` that contains a marker.
pub fn class_ratios(cm: &CycleModel, policy: &[usize]) -> Vec<(Vec<usize>, f64)> {
    let rows = dense_rows(cm, policy);
    recurrent_classes(&rows)
        .into_iter()
        .filter(|c| c.iter().any(|&i| cm.marker[i]))
        .map(|class| {
            let pi = stationary_on(&rows, &class);
            let cost: f64 = class.iter().zip(&pi).map(|(&i, p)| p * cm.choices[i][policy[i]].cost).sum();
            let rate: f64 = class.iter().zip(&pi).filter(|(&i, _)| cm.marker[i]).map(|(_, p)| p).sum();
            (class, cost / rate)
        })
        .collect()
}

/// Minimal cost per cycle over all memoryless policies and all their
/// marker-visiting recurrent classes.
pub fn acpc_oracle(cm: &CycleModel) -> Option<f64> {
    let sizes: Vec<usize> = cm.choices.iter().map(Vec::len).collect();
    let mut best: Option<f64> = None;
    for_each_policy(&sizes, |pol| {
        for (_, j) in class_ratios(cm, pol) {
            best = Some(best.map_or(j, |b| b.min(j)));
        }
    });
    best
}

/// True when every recurrent class reachable from `start` under `policy`
/// visits a marker, so that any number of cycles completes almost surely.
pub fn completes_cycles(cm: &CycleModel, policy: &[usize], start: usize) -> bool {
    let rows = dense_rows(cm, policy);
    let n = rows.len();
    let succ: Vec<Vec<usize>> = rows.iter().map(|r| (0..n).filter(|&j| r[j] > 0.0).collect()).collect();
    let r = closure(&succ);
    recurrent_classes(&rows)
        .iter()
        .filter(|c| r[start][c[0]])
        .all(|c| c.iter().any(|&i| cm.marker[i]))
}

/// Monte-Carlo estimate of the `T`-cycle cost per cycle from `start`:
/// mean and standard error over `episodes` independent runs.
pub fn mc_t_cycle(cm: &CycleModel, policy: &[usize], t: usize, start: usize, episodes: u64, seed: u64) -> (f64, f64) {
    let mut rng = StdRng::seed_from_u64(seed);
    let cdf: Vec<Vec<(usize, f64)>> = (0..cm.len())
        .map(|i| {
            let mut acc = 0.0;
            cm.choices[i][policy[i]]
                .successors
                .iter()
                .map(|&(j, p)| {
                    acc += p;
                    (j, acc)
                })
                .collect()
        })
        .collect();
    let cost: Vec<f64> = (0..cm.len()).map(|i| cm.choices[i][policy[i]].cost).collect();
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..episodes {
        let mut s = start;
        let mut total = 0.0;
        let mut cycles = 0;
        while cycles < t {
            total += cost[s];
            let u: f64 = rng.random::<f64>() * cdf[s].last().unwrap().1;
            s = cdf[s].iter().find(|&&(_, c)| u < c).unwrap_or(cdf[s].last().unwrap()).0;
            if cm.marker[s] {
                cycles += 1;
            }
        }
        let x = total / t as f64;
        sum += x;
        sq += x * x;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Longest marker-to-marker path inside the component by depth-first
/// search over simple paths; `None` if some cycle avoids every marker.
pub fn cycle_bound_oracle(cm: &CycleModel) -> Option<usize> {
    let n = cm.len();
    let succ: Vec<BTreeSet<usize>> = cm
        .choices
        .iter()
        .map(|row| row.iter().flat_map(|c| c.successors.iter().filter(|(_, p)| *p > 0.0).map(|(j, _)| *j)).collect())
        .collect();
    fn dfs(u: usize, depth: usize, on_path: &mut Vec<bool>, succ: &[BTreeSet<usize>], marker: &[bool]) -> Option<usize> {
        let mut best = 0;
        for &v in &succ[u] {
            if marker[v] {
                best = best.max(depth + 1);
            } else if on_path[v] {
                return None;
            } else {
                on_path[v] = true;
                let d = dfs(v, depth + 1, on_path, succ, marker);
                on_path[v] = false;
                best = best.max(d?);
            }
        }
        Some(best)
    }
    let mut best = 0;
    let mut on_path = vec![false; n];
    for u in (0..n).filter(|&u| cm.marker[u]) {
        best = best.max(dfs(u, 0, &mut on_path, &succ, &cm.marker)?);
    }
    // a marker-free cycle not reachable from any marker cannot exist in a
    // communicating component, but check anyway
    for u in (0..n).filter(|&u| !cm.marker[u]) {
        on_path[u] = true;
        dfs(u, 0, &mut on_path, &succ, &cm.marker)?;
        on_path[u] = false;
    }
    Some(best)
}

/// Truth of `f` at position 0 of the lasso word `prefix · cycle^ω`, by
/// fixpoint evaluation over the finitely many distinct positions.
pub fn lasso_holds(f: &Ltl, prefix: &[BTreeSet<String>], cycle: &[BTreeSet<String>]) -> bool {
    let word: Vec<&BTreeSet<String>> = prefix.iter().chain(cycle).collect();
    let len = word.len();
    let next = |i: usize| if i + 1 < len { i + 1 } else { prefix.len() };
    fn eval(f: &Ltl, word: &[&BTreeSet<String>], next: &dyn Fn(usize) -> usize) -> Vec<bool> {
        let len = word.len();
        match f {
            Ltl::True => vec![true; len],
            Ltl::False => vec![false; len],
            Ltl::Ap(p) => word.iter().map(|l| l.contains(p)).collect(),
            Ltl::Not(a) => eval(a, word, next).into_iter().map(|x| !x).collect(),
            Ltl::And(a, b) => zip(eval(a, word, next), eval(b, word, next), |x, y| x && y),
            Ltl::Or(a, b) => zip(eval(a, word, next), eval(b, word, next), |x, y| x || y),
            Ltl::Implies(a, b) => zip(eval(a, word, next), eval(b, word, next), |x, y| !x || y),
            Ltl::Next(a) => {
                let v = eval(a, word, next);
                (0..len).map(|i| v[next(i)]).collect()
            }
            Ltl::Finally(a) => until(&vec![true; len], &eval(a, word, next), next),
            Ltl::Globally(a) => {
                let neg: Vec<bool> = eval(a, word, next).into_iter().map(|x| !x).collect();
                until(&vec![true; len], &neg, next).into_iter().map(|x| !x).collect()
            }
            Ltl::Until(a, b) => until(&eval(a, word, next), &eval(b, word, next), next),
        }
    }
    fn zip(a: Vec<bool>, b: Vec<bool>, f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
        a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect()
    }
    // least fixpoint of X = b | (a & next X)
    fn until(a: &[bool], b: &[bool], next: &dyn Fn(usize) -> usize) -> Vec<bool> {
        let mut x = b.to_vec();
        loop {
            let y: Vec<bool> = (0..x.len()).map(|i| b[i] || (a[i] && x[next(i)])).collect();
            if y == x {
                return x;
            }
            x = y;
        }
    }
    eval(f, &word, &next)[0]
}

/// Strongly connected components from the transitive closure, each sorted,
/// listed by smallest member.
pub fn scc_oracle(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let r = closure(succ);
    let n = succ.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let comp: Vec<usize> = (0..n).filter(|&j| r[i][j] && r[j][i]).collect();
        for &j in &comp {
            seen[j] = true;
        }
        out.push(comp);
    }
    out
}
