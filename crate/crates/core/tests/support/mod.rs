//! Shared fixtures, generators and oracles for the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::PathBuf;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub fn examples_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples")
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn example(name: &str) -> PathBuf {
    examples_dir().join(name)
}

pub fn read_example(name: &str) -> String {
    std::fs::read_to_string(example(name)).unwrap()
}

// ---------------------------------------------------------------------------
// Cleaning-agent policy and scripted fixes, generated from readable rules.

pub const CLEANING_ACTIONS: [&str; 9] = [
    "next",
    "charge1",
    "charge2",
    "clean1_opt1",
    "clean1_opt2",
    "clean2_opt1",
    "clean2_opt2",
    "clean_all",
    "idle",
];

/// Preference order of the unsafe hand-written policy. It leaves rooms with
/// dirt1=3 (wrong room switch) and keeps cleaning instead of charging when
/// the room is dirty at low energy.
pub fn cleaning_preferences(d1: i64, d2: i64, e: i64, s: i64, b: i64) -> Vec<&'static str> {
    let head: &[&str] = if d1 < 0 || e == 0 {
        &["idle"]
    } else if b == 1 {
        &["next", "idle"]
    } else if e <= 2 && d1 == 0 && d2 == 0 {
        &["charge1", "next"]
    } else if d1 == 3 {
        &["next", "clean1_opt2", "clean1_opt1"]
    } else if s > 0 && e > 2 {
        &["idle", "clean1_opt1", "clean2_opt1"]
    } else if d1 > 0 {
        &["clean1_opt1", "clean1_opt2", "clean_all"]
    } else if d2 > 0 {
        &["clean2_opt1", "clean2_opt2", "clean_all"]
    } else {
        &["next"]
    };
    let mut order: Vec<&str> = head.to_vec();
    for a in CLEANING_ACTIONS {
        if !order.contains(&a) {
            order.push(a);
        }
    }
    order
}

pub fn cleaning_grid() -> Vec<[i64; 5]> {
    let mut out = Vec::new();
    for d1 in -5..=3 {
        for d2 in 0..=3 {
            for e in 0..=8 {
                for s in 0..=2 {
                    for b in 0..=1 {
                        out.push([d1, d2, e, s, b]);
                    }
                }
            }
        }
    }
    out
}

pub fn cleaning_policy_json() -> String {
    let actions: Vec<String> = CLEANING_ACTIONS.iter().map(|a| format!("\"{a}\"")).collect();
    let mut out = format!(
        "{{\"type\": \"tabular\", \"actions\": [{}], \"entries\": [\n",
        actions.join(", ")
    );
    let grid = cleaning_grid();
    for (i, st) in grid.iter().enumerate() {
        let pref = cleaning_preferences(st[0], st[1], st[2], st[3], st[4]);
        let q: Vec<String> = CLEANING_ACTIONS
            .iter()
            .map(|a| {
                let rank = pref.iter().position(|p| p == a).unwrap();
                format!("{}.0", CLEANING_ACTIONS.len() - rank)
            })
            .collect();
        let state: Vec<String> = st.iter().map(i64::to_string).collect();
        out.push_str(&format!(
            "  {{\"state\": [{}], \"q\": [{}]}}{}\n",
            state.join(", "),
            q.join(", "),
            if i + 1 < grid.len() { "," } else { "" }
        ));
    }
    out.push_str("]}\n");
    out
}

/// Scripted repairs: charge at energy 1 in dirty rooms, clean heavy dirt
/// instead of leaving.
pub fn cleaning_fix_json() -> String {
    let mut lines = Vec::new();
    for [d1, d2, e, s, b] in cleaning_grid() {
        if d1 < 0 || e == 0 || b == 1 {
            continue;
        }
        let action = if e == 1 && (d1 > 0 || d2 > 0) {
            "charge1"
        } else if d1 == 3 {
            "clean1_opt2"
        } else {
            continue;
        };
        lines.push(format!("  {{\"state\": [{d1}, {d2}, {e}, {s}, {b}], \"action\": \"{action}\"}}"));
    }
    format!("[\n{}\n]\n", lines.join(",\n"))
}

// ---------------------------------------------------------------------------
// Random MDPs written as PRISM text, with an independent semantics.

/// Small deterministic generator so fixtures do not depend on any RNG crate's
/// stream stability.
pub struct SplitMix(u64);

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// A random single-variable MDP: state `s` in `0..n`, each action enabled in
/// a random subset, with 1-3 successors and probabilities in hundredths.
#[derive(Debug, Clone)]
pub struct RandomMdp {
    pub n: usize,
    pub actions: Vec<String>,
    /// (action, state) → list of (successor, hundredths)
    pub trans: BTreeMap<(usize, usize), Vec<(usize, u32)>>,
    pub bad: Vec<usize>,
    /// policy scores: state → per action
    pub scores: Vec<Vec<f64>>,
}

impl RandomMdp {
    pub fn generate(seed: u64) -> Self {
        let mut rng = SplitMix::new(seed);
        let n = 4 + rng.below(197) as usize;
        let k = 1 + rng.below(4) as usize;
        let actions: Vec<String> = (0..k).map(|i| format!("act{i}")).collect();
        let mut trans = BTreeMap::new();
        for s in 0..n {
            let always = rng.below(k as u64) as usize;
            for a in 0..k {
                // every action appears at least once (state `a`)
                if a != always && s != a && rng.below(3) == 0 {
                    continue;
                }
                let m = 1 + rng.below(3) as usize;
                let mut succ: Vec<(usize, u32)> = Vec::new();
                let mut left = 100u32;
                for i in 0..m {
                    // bias towards nearby states so chains are deep
                    let t = if rng.below(4) == 0 {
                        rng.below(n as u64) as usize
                    } else {
                        (s + rng.below(4) as usize).min(n - 1)
                    };
                    let p = if i + 1 == m { left } else { 1 + rng.below(left as u64 - (m - i - 1) as u64) as u32 };
                    left -= p;
                    match succ.iter_mut().find(|e| e.0 == t) {
                        Some(e) => e.1 += p,
                        None => succ.push((t, p)),
                    }
                    if left == 0 {
                        break;
                    }
                }
                if left > 0 {
                    succ.last_mut().unwrap().1 += left;
                }
                trans.insert((a, s), succ);
            }
        }
        let bad: Vec<usize> = (0..n).filter(|_| rng.below(10) == 0).collect();
        let scores = (0..n)
            .map(|_| (0..k).map(|_| rng.below(1000) as f64 / 10.0).collect())
            .collect();
        RandomMdp {
            n,
            actions,
            trans,
            bad,
            scores,
        }
    }

    pub fn to_prism(&self) -> String {
        let mut out = String::from("mdp\n\nmodule random\n");
        out.push_str(&format!("  s : [0..{}] init 0;\n\n", self.n - 1));
        for ((a, s), succ) in &self.trans {
            let branches: Vec<String> = succ
                .iter()
                .map(|(t, p)| format!("{}:(s'={t})", hundredths(*p)))
                .collect();
            out.push_str(&format!("  [{}] s={s} -> {};\n", self.actions[*a], branches.join(" + ")));
        }
        out.push_str("endmodule\n\n");
        let bad = if self.bad.is_empty() {
            "false".to_string()
        } else {
            self.bad.iter().map(|b| format!("s={b}")).collect::<Vec<_>>().join(" | ")
        };
        out.push_str(&format!("label \"bad\" = {bad};\n"));
        out
    }

    pub fn policy_json(&self) -> String {
        let actions: Vec<String> = self.actions.iter().map(|a| format!("\"{a}\"")).collect();
        let entries: Vec<String> = self
            .scores
            .iter()
            .enumerate()
            .map(|(s, q)| {
                let q: Vec<String> = q.iter().map(|v| format!("{v:?}")).collect();
                format!("{{\"state\": [{s}], \"q\": [{}]}}", q.join(", "))
            })
            .collect();
        format!(
            "{{\"type\": \"tabular\", \"actions\": [{}], \"entries\": [{}]}}",
            actions.join(", "),
            entries.join(", ")
        )
    }

    /// Masked argmax with declaration-order tie breaking, computed directly.
    pub fn policy_action(&self, s: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for a in 0..self.actions.len() {
            if !self.trans.contains_key(&(a, s)) {
                continue;
            }
            if best.is_none_or(|b| self.scores[s][a] > self.scores[s][b]) {
                best = Some(a);
            }
        }
        best
    }

    /// Reachable states in BFS order under the policy.
    pub fn oracle_bfs(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        let mut order = vec![0];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(s) = queue.pop_front() {
            for (t, _) in self.oracle_successors(s) {
                if !seen[t] {
                    seen[t] = true;
                    order.push(t);
                    queue.push_back(t);
                }
            }
        }
        order
    }

    fn oracle_successors(&self, s: usize) -> Vec<(usize, u32)> {
        match self.policy_action(s) {
            Some(a) => self.trans[&(a, s)].clone(),
            None => vec![(s, 100)],
        }
    }

    /// P(F bad) from state 0 by a dense solve over all reachable states.
    pub fn oracle_probability(&self) -> f64 {
        let states = self.oracle_bfs();
        let idx: HashMap<usize, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let rows: Vec<Vec<(usize, f64)>> = states
            .iter()
            .map(|&s| {
                self.oracle_successors(s)
                    .into_iter()
                    .map(|(t, p)| (idx[&t], p as f64 / 100.0))
                    .collect()
            })
            .collect();
        let bad: Vec<bool> = states.iter().map(|s| self.bad.contains(s)).collect();
        dense_reachability(&rows, &bad)[0]
    }

    pub fn oracle_probability_exact(&self) -> BigRational {
        let states = self.oracle_bfs();
        let idx: HashMap<usize, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let rows: Vec<Vec<(usize, BigRational)>> = states
            .iter()
            .map(|&s| {
                self.oracle_successors(s)
                    .into_iter()
                    .map(|(t, p)| (idx[&t], BigRational::new(BigInt::from(p), BigInt::from(100))))
                    .collect()
            })
            .collect();
        let bad: Vec<bool> = states.iter().map(|s| self.bad.contains(s)).collect();
        dense_reachability_exact(&rows, &bad)[0].clone()
    }
}

fn hundredths(p: u32) -> String {
    if p == 100 {
        "1".into()
    } else {
        format!("{}/100", p)
    }
}

/// Backward closure: states with a path into `bad`.
pub fn reaches<T>(rows: &[Vec<(usize, T)>], bad: &[bool]) -> Vec<bool> {
    let mut reach = bad.to_vec();
    loop {
        let mut changed = false;
        for i in 0..rows.len() {
            if !reach[i] && rows[i].iter().any(|(j, _)| reach[*j]) {
                reach[i] = true;
                changed = true;
            }
        }
        if !changed {
            return reach;
        }
    }
}

/// Dense Gaussian elimination with partial pivoting on (I - A) x = b.
#[allow(clippy::needless_range_loop)]
pub fn dense_reachability(rows: &[Vec<(usize, f64)>], bad: &[bool]) -> Vec<f64> {
    let n = rows.len();
    let reach = reaches(rows, bad);
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        a[i][i] = 1.0;
        if bad[i] {
            a[i][n] = 1.0;
        } else if reach[i] {
            for &(j, p) in &rows[i] {
                a[i][j] -= p;
            }
        }
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        for k in col..=n {
            a[col][k] /= d;
        }
        for r in 0..n {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col];
                for k in col..=n {
                    a[r][k] -= f * a[col][k];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n]).collect()
}

#[allow(clippy::needless_range_loop)]
pub fn dense_reachability_exact(rows: &[Vec<(usize, BigRational)>], bad: &[bool]) -> Vec<BigRational> {
    let n = rows.len();
    let reach = reaches(rows, bad);
    let mut a = vec![vec![BigRational::zero(); n + 1]; n];
    for i in 0..n {
        a[i][i] = BigRational::one();
        if bad[i] {
            a[i][n] = BigRational::one();
        } else if reach[i] {
            for (j, p) in &rows[i] {
                a[i][*j] = &a[i][*j] - p;
            }
        }
    }
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero()).unwrap();
        a.swap(col, piv);
        let d = a[col][col].clone();
        for k in col..=n {
            a[col][k] = &a[col][k] / &d;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for k in col..=n {
                    let v = &f * &a[col][k];
                    a[r][k] = &a[r][k] - v;
                }
            }
        }
    }
    (0..n).map(|i| a[i][n].clone()).collect()
}

/// Monotone random walk on a `w`×`h` grid with one bad cell. Before either
/// edge is reached every step is a fair coin, so
/// P(F bad) = C(bx+by, bx) / 2^(bx+by) when bx < w-1 and by < h-1.
pub fn grid_prism(w: i64, h: i64, bx: i64, by: i64) -> String {
    format!(
        "mdp

module grid
  x : [0..{mx}] init 0;
  y : [0..{my}] init 0;

  [step] x<{mx} & y<{my} -> 1/2:(x'=x+1) + 1/2:(y'=y+1);
  [step] x={mx} & y<{my} -> (y'=y+1);
  [step] x<{mx} & y={my} -> (x'=x+1);
  [step] x={mx} & y={my} -> true;
endmodule

label \"bad\" = x={bx} & y={by};
",
        mx = w - 1,
        my = h - 1
    )
}

pub const STEP_POLICY: &str =
    r#"{"type": "mlp", "actions": ["step"], "layers": [{"w": [[0.0, 0.0]], "b": [0.0], "act": "id"}]}"#;

/// C(n, k) / 2^n computed in log space.
pub fn binomial_half(n: u64, k: u64) -> f64 {
    let ln_fact = |m: u64| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    (ln_fact(n) - ln_fact(k) - ln_fact(n - k) - n as f64 * std::f64::consts::LN_2).exp()
}

// ---------------------------------------------------------------------------
// Minimal HTTP/1.1 server for client tests.

pub mod http {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{TcpListener, TcpStream};
    use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
    use std::sync::Arc;
    use std::thread::JoinHandle;
    use std::time::Duration;

    pub type Responder = Box<dyn Fn(usize, &str) -> (u16, String) + Send>;

    pub struct MockServer {
        pub url: String,
        hits: Arc<AtomicUsize>,
        stop: Arc<AtomicBool>,
        handle: Option<JoinHandle<()>>,
    }

    impl MockServer {
        /// `responder(request_index, body)` gives status and response body.
        pub fn start(responder: Responder) -> Self {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            listener.set_nonblocking(true).unwrap();
            let url = format!("http://{}", listener.local_addr().unwrap());
            let hits = Arc::new(AtomicUsize::new(0));
            let stop = Arc::new(AtomicBool::new(false));
            let (h, s) = (hits.clone(), stop.clone());
            let handle = std::thread::spawn(move || {
                while !s.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let n = h.fetch_add(1, Ordering::SeqCst);
                            serve(stream, n, &responder);
                        }
                        Err(_) => std::thread::sleep(Duration::from_millis(5)),
                    }
                }
            });
            MockServer {
                url,
                hits,
                stop,
                handle: Some(handle),
            }
        }

        /// Connections accepted so far.
        pub fn hits(&self) -> usize {
            self.hits.load(Ordering::SeqCst)
        }
    }

    impl Drop for MockServer {
        fn drop(&mut self) {
            self.stop.store(true, Ordering::SeqCst);
            if let Some(h) = self.handle.take() {
                let _ = h.join();
            }
        }
    }

    fn serve(stream: TcpStream, n: usize, responder: &Responder) {
        stream.set_nonblocking(false).unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut len = 0usize;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; len];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        let (status, reply) = responder(n, &String::from_utf8_lossy(&body));
        let mut stream = stream;
        let _ = write!(
            stream,
            "HTTP/1.1 {status} MOCK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
            reply.len()
        );
        let _ = stream.flush();
    }

    /// Chat-completions reply carrying `content`.
    pub fn completion(content: &str) -> String {
        serde_json::json!({
            "id": "mock",
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
        })
        .to_string()
    }
}
