//! Temporal bipartite interaction network: posters on one side, the handles
//! they mention or retweet on the other. Per-node daily link timelines are
//! clustered with k-means to profile how users link over time.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use chrono::{DateTime, NaiveDate, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::social::{Gender, SocialPost};
use crate::DateRange;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid range: {start} is after {end}")]
    InvalidRange { start: NaiveDate, end: NaiveDate },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Poster,
    Target,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Poster => "poster",
            NodeKind::Target => "target",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorNode {
    pub id: String,
    pub kind: NodeKind,
    pub gender: Gender,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Mention,
    Retweet,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Mention => "mention",
            EdgeKind::Retweet => "retweet",
        }
    }
}

/// `src` is always a poster handle and `dst` a target handle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalEdge {
    pub src: String,
    pub dst: String,
    pub timestamp: DateTime<Utc>,
    pub kind: EdgeKind,
    pub post_id: String,
}

impl TemporalEdge {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }

    fn endpoint(&self, kind: NodeKind) -> &str {
        match kind {
            NodeKind::Poster => &self.src,
            NodeKind::Target => &self.dst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Network {
    pub nodes: Vec<ActorNode>,
    pub edges: Vec<TemporalEdge>,
}

impl Network {
    pub fn node(&self, id: &str, kind: NodeKind) -> Option<&ActorNode> {
        self.nodes.iter().find(|n| n.kind == kind && n.id == id)
    }
}

fn is_handle_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn read_handle(s: &str) -> Option<(String, usize)> {
    let len: usize = s.chars().take_while(|c| is_handle_char(*c)).map(char::len_utf8).sum();
    (len > 0).then(|| (s[..len].to_lowercase(), len))
}

/// Targets named in a post, in order of appearance, duplicates removed.
pub fn parse_targets(text: &str) -> Vec<(String, EdgeKind)> {
    let mut out: Vec<(String, EdgeKind)> = Vec::new();
    let trimmed = text.trim_start();
    let mut rest = trimmed;
    let mut prev: Option<char> = None;
    if let Some(after) = trimmed.strip_prefix("RT @") {
        if let Some((h, len)) = read_handle(after) {
            out.push((h, EdgeKind::Retweet));
            rest = &after[len..];
            prev = Some('x');
        }
    }
    for (i, c) in rest.char_indices() {
        if c == '@' && !prev.is_some_and(is_handle_char) {
            if let Some((h, _)) = read_handle(&rest[i + 1..]) {
                if !out.iter().any(|(t, _)| *t == h) {
                    out.push((h, EdgeKind::Mention));
                }
            }
        }
        prev = Some(c);
    }
    out
}

/// Network over posts whose UTC date lies in `range`.
pub fn build_network(posts: &[SocialPost], range: &DateRange) -> Network {
    let mut poster_gender: BTreeMap<String, Gender> = BTreeMap::new();
    let mut edges = Vec::new();
    for p in posts.iter().filter(|p| range.contains(p.date())) {
        let src = p.author_id.to_lowercase();
        poster_gender.entry(src.clone()).or_insert(p.gender);
        for (dst, kind) in parse_targets(&p.text) {
            edges.push(TemporalEdge {
                src: src.clone(),
                dst,
                timestamp: p.timestamp,
                kind,
                post_id: p.id.clone(),
            });
        }
    }
    let targets: BTreeSet<&str> = edges.iter().map(|e| e.dst.as_str()).collect();
    let mut nodes: Vec<ActorNode> = poster_gender
        .iter()
        .map(|(id, g)| ActorNode {
            id: id.clone(),
            kind: NodeKind::Poster,
            gender: *g,
        })
        .collect();
    nodes.extend(targets.into_iter().map(|id| ActorNode {
        id: id.to_string(),
        kind: NodeKind::Target,
        gender: poster_gender.get(id).copied().unwrap_or(Gender::Unknown),
    }));
    Network { nodes, edges }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTimeline {
    pub node: String,
    pub kind: NodeKind,
    pub interval: DateRange,
    pub bins: Vec<u32>,
}

impl LinkTimeline {
    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| u64::from(*b)).sum()
    }

    pub fn as_vector(&self) -> Vec<f64> {
        self.bins.iter().map(|b| f64::from(*b)).collect()
    }
}

/// Daily incident-edge counts for every node of `kind` with at least one
/// edge inside `[start, end]`, sorted by node id.
pub fn node_timelines(
    edges: &[TemporalEdge],
    start: NaiveDate,
    end: NaiveDate,
    kind: NodeKind,
) -> Result<Vec<LinkTimeline>, NetError> {
    let interval = DateRange::new(start, end).map_err(|_| NetError::InvalidRange { start, end })?;
    let days = interval.num_days();
    let mut bins: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for e in edges {
        if let Some(i) = interval.offset(e.date()) {
            bins.entry(e.endpoint(kind)).or_insert_with(|| vec![0; days])[i] += 1;
        }
    }
    Ok(bins
        .into_iter()
        .map(|(node, bins)| LinkTimeline {
            node: node.to_string(),
            kind,
            interval,
            bins,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Independent k-means++ starts; the lowest final inertia wins.
    pub n_init: usize,
    /// Scale each vector to unit L1 norm before clustering.
    pub normalize: bool,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 4,
            seed: 0,
            max_iter: 100,
            n_init: 10,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after every update of the winning start, first to last.
    pub history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn inertia_of(points: &[Vec<f64>], assign: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(assign).map(|(p, &c)| sq_dist(p, &centroids[c])).sum()
}

fn means(points: &[Vec<f64>], assign: &[usize], k: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assign) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            s.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    (sums, counts)
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|d| {
                    acc += d;
                    acc > r
                })
                .unwrap_or_else(|| d2.iter().rposition(|d| *d > 0.0).unwrap_or(n - 1))
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn nearest(p: &[f64], centroids: &[Vec<f64>], current: Option<usize>) -> usize {
    // keep the current cluster on ties so a fixpoint is reachable
    let mut best = current.unwrap_or(0);
    let mut best_d = sq_dist(p, &centroids[best]);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn single_run(points: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let dim = points[0].len();
    let mut centroids = plus_plus(points, k, rng);
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centroids, None)).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (mut c, mut counts) = means(points, &assign, k, dim);
        // an empty cluster takes over the point lying farthest from its centroid
        while let Some(empty) = counts.iter().position(|n| *n == 0) {
            let far = (0..points.len()).filter(|&i| counts[assign[i]] > 1).max_by(|&a, &b| {
                sq_dist(&points[a], &c[assign[a]])
                    .total_cmp(&sq_dist(&points[b], &c[assign[b]]))
                    .then(b.cmp(&a))
            });
            let Some(far) = far else { break };
            assign[far] = empty;
            (c, counts) = means(points, &assign, k, dim);
        }
        centroids = c;
        history.push(inertia_of(points, &assign, &centroids));
        if iterations >= max_iter {
            break;
        }
        let next: Vec<usize> = points
            .iter()
            .zip(&assign)
            .map(|(p, &a)| nearest(p, &centroids, Some(a)))
            .collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    hartigan(points, &mut assign, &mut centroids, &mut history);
    KMeansResult {
        inertia: *history.last().expect("at least one update"),
        assignments: assign,
        centroids,
        history,
        iterations,
    }
}

/// Single-point moves that strictly lower inertia, applied after Lloyd has
/// settled; escapes some of Lloyd's poor fixpoints.
fn hartigan(points: &[Vec<f64>], assign: &mut [usize], centroids: &mut Vec<Vec<f64>>, history: &mut Vec<f64>) {
    let k = centroids.len();
    let dim = points[0].len();
    let mut current = *history.last().expect("lloyd ran");
    for _ in 0..points.len() * k * 4 {
        let (mut c, mut counts) = means(points, assign, k, dim);
        let saved = assign.to_vec();
        let mut moved = false;
        for i in 0..points.len() {
            let a = assign[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let out_gain = na / (na - 1.0) * sq_dist(&points[i], &c[a]);
            let mut best: Option<(usize, f64)> = None;
            for b in (0..k).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let cost = nb / (nb + 1.0) * sq_dist(&points[i], &c[b]);
                if cost < out_gain * (1.0 - 1e-9) && best.is_none_or(|(_, v)| cost < v) {
                    best = Some((b, cost));
                }
            }
            let Some((b, _)) = best else { continue };
            let nb = counts[b] as f64;
            for (j, x) in points[i].iter().enumerate() {
                c[a][j] = (na * c[a][j] - x) / (na - 1.0);
                c[b][j] = (nb * c[b][j] + x) / (nb + 1.0);
            }
            counts[a] -= 1;
            counts[b] += 1;
            assign[i] = b;
            moved = true;
        }
        if !moved {
            break;
        }
        let (exact, _) = means(points, assign, k, dim);
        let after = inertia_of(points, assign, &exact);
        if after >= current {
            // round-off ate the gain; keep the previous partition
            assign.copy_from_slice(&saved);
            break;
        }
        *centroids = exact;
        current = after;
        history.push(after);
    }
}

fn l1_normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().map(|x| x.abs()).sum();
    if s > 0.0 {
        v.iter().map(|x| x / s).collect()
    } else {
        v.to_vec()
    }
}

pub fn kmeans_with(vectors: &[Vec<f64>], cfg: &KMeansConfig) -> Result<KMeansResult, NetError> {
    let n = vectors.len();
    if cfg.k == 0 || cfg.k > n {
        return Err(NetError::InvalidParameter(format!(
            "k = {} needs 1 <= k <= {n} vectors",
            cfg.k
        )));
    }
    if cfg.max_iter == 0 || cfg.n_init == 0 {
        return Err(NetError::InvalidParameter(
            "max_iter and n_init must be positive".into(),
        ));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(NetError::InvalidParameter("vectors differ in length".into()));
    }
    let points: Vec<Vec<f64>> = if cfg.normalize {
        vectors.iter().map(|v| l1_normalized(v)).collect()
    } else {
        vectors.to_vec()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..cfg.n_init {
        let run = single_run(&points, cfg.k, cfg.max_iter, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

pub fn kmeans(vectors: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult, NetError> {
    kmeans_with(
        vectors,
        &KMeansConfig {
            k,
            seed,
            max_iter,
            ..KMeansConfig::default()
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCluster {
    pub id: usize,
    pub centroid: Vec<f64>,
    pub members: Vec<String>,
    pub aggregate: Vec<u64>,
}

/// Elementwise sum of member timelines per cluster; clusters without
/// members are dropped.
pub fn profile_aggregate(result: &KMeansResult, timelines: &[LinkTimeline]) -> Vec<ProfileCluster> {
    assert_eq!(
        result.assignments.len(),
        timelines.len(),
        "assignments must cover all timelines"
    );
    let dim = timelines.first().map_or(0, |t| t.bins.len());
    let mut clusters: Vec<ProfileCluster> = result
        .centroids
        .iter()
        .enumerate()
        .map(|(id, c)| ProfileCluster {
            id,
            centroid: c.clone(),
            members: Vec::new(),
            aggregate: vec![0; dim],
        })
        .collect();
    for (t, &a) in timelines.iter().zip(&result.assignments) {
        let c = &mut clusters[a];
        c.members.push(t.node.clone());
        for (s, b) in c.aggregate.iter_mut().zip(&t.bins) {
            *s += u64::from(*b);
        }
    }
    clusters.retain(|c| !c.members.is_empty());
    clusters
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GenderSplit {
    pub female: Vec<LinkTimeline>,
    pub male: Vec<LinkTimeline>,
    pub unknown: Vec<LinkTimeline>,
}

impl GenderSplit {
    pub fn len(&self) -> usize {
        self.female.len() + self.male.len() + self.unknown.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn gender_split(nodes: &[ActorNode], timelines: &[LinkTimeline]) -> GenderSplit {
    let lookup: HashMap<(&str, NodeKind), Gender> = nodes.iter().map(|n| ((n.id.as_str(), n.kind), n.gender)).collect();
    let mut split = GenderSplit::default();
    for t in timelines {
        let bucket = match lookup
            .get(&(t.node.as_str(), t.kind))
            .copied()
            .unwrap_or(Gender::Unknown)
        {
            Gender::Female => &mut split.female,
            Gender::Male => &mut split.male,
            Gender::Unknown => &mut split.unknown,
        };
        bucket.push(t.clone());
    }
    split
}

/// Clustering outcome for one node kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindProfile {
    pub kind: NodeKind,
    pub interval: DateRange,
    pub nodes: usize,
    pub links: u64,
    pub k: usize,
    #[serde(with = "crate::num")]
    pub inertia: f64,
    pub clusters: Vec<ProfileCluster>,
    pub female: usize,
    pub male: usize,
    pub unknown: usize,
}

/// Timelines, k-means and aggregation for one kind. `k` is capped at the
/// number of active nodes; `None` when no node of that kind has a link.
pub fn profile_kind(
    net: &Network,
    interval: &DateRange,
    kind: NodeKind,
    cfg: &KMeansConfig,
) -> Result<Option<KindProfile>, NetError> {
    let timelines = node_timelines(&net.edges, interval.start, interval.end, kind)?;
    if timelines.is_empty() {
        return Ok(None);
    }
    let vectors: Vec<Vec<f64>> = timelines.iter().map(LinkTimeline::as_vector).collect();
    let cfg = KMeansConfig {
        k: cfg.k.min(vectors.len()),
        ..*cfg
    };
    let result = kmeans_with(&vectors, &cfg)?;
    let split = gender_split(&net.nodes, &timelines);
    Ok(Some(KindProfile {
        kind,
        interval: *interval,
        nodes: timelines.len(),
        links: timelines.iter().map(LinkTimeline::total).sum(),
        k: cfg.k,
        inertia: result.inertia,
        clusters: profile_aggregate(&result, &timelines),
        female: split.female.len(),
        male: split.male.len(),
        unknown: split.unknown.len(),
    }))
}

pub fn edges_to_csv(edges: &[TemporalEdge]) -> String {
    let mut s = String::from("src,dst,kind,date,post_id\n");
    for e in edges {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            e.src,
            e.dst,
            e.kind.as_str(),
            e.date(),
            csv_field(&e.post_id)
        );
    }
    s
}

fn csv_field(v: &str) -> String {
    if v.contains([',', '"', '\n']) {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v.to_string()
    }
}

pub fn clusters_to_csv(nodes: &[ActorNode], profiles: &[KindProfile]) -> String {
    let mut s = String::from("cluster_id,node_id,kind,gender\n");
    for p in profiles {
        for c in &p.clusters {
            for m in &c.members {
                let g = nodes
                    .iter()
                    .find(|n| n.kind == p.kind && n.id == *m)
                    .map_or(Gender::Unknown, |n| n.gender);
                let _ = writeln!(s, "{},{},{},{}", c.id, m, p.kind.as_str(), g.code());
            }
        }
    }
    s
}

/// Aggregate timelines; cluster ids are prefixed with the node kind since
/// posters and targets are clustered separately.
pub fn aggregates_to_csv(profiles: &[KindProfile]) -> String {
    let mut s = String::from("cluster_id,day_index,count\n");
    for p in profiles {
        for c in &p.clusters {
            for (i, v) in c.aggregate.iter().enumerate() {
                let _ = writeln!(s, "{}-{},{},{}", p.kind.as_str(), c.id, i, v);
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;
    use rand::Rng;

    fn post(id: &str, author: &str, day: u32, text: &str, gender: Gender) -> SocialPost {
        SocialPost {
            id: id.into(),
            timestamp: Utc.with_ymd_and_hms(2014, 8, day, 12, 0, 0).unwrap(),
            text: text.into(),
            author_id: author.into(),
            gender,
            geo: None,
            platform: "twitter".into(),
        }
    }

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2014, 8, day).unwrap()
    }

    fn range(a: u32, b: u32) -> DateRange {
        DateRange::new(d(a), d(b)).unwrap()
    }

    #[test]
    fn parsing_rules() {
        assert_eq!(parse_targets("RT @a hello"), vec![("a".into(), EdgeKind::Retweet)]);
        assert_eq!(
            parse_targets("thanks @b and @C!"),
            vec![("b".into(), EdgeKind::Mention), ("c".into(), EdgeKind::Mention)]
        );
        assert!(parse_targets("no handles here").is_empty());
        assert!(parse_targets("mail me at x@example.com or @ alone").is_empty());
        assert_eq!(
            parse_targets("  RT @Ana_1: @ana_1 @bo"),
            vec![("ana_1".into(), EdgeKind::Retweet), ("bo".into(), EdgeKind::Mention)]
        );
        // not at the start, so a plain mention
        assert_eq!(parse_targets("ok RT @z"), vec![("z".into(), EdgeKind::Mention)]);
    }

    #[test]
    fn network_construction() {
        let posts = vec![
            post("1", "U", 1, "RT @a hello", Gender::Female),
            post("2", "v", 2, "thanks @b and @c", Gender::Male),
            post("3", "w", 2, "quiet", Gender::Unknown),
            post("4", "a", 3, "@u", Gender::Male),
            post("5", "x", 20, "@a", Gender::Male),
        ];
        let net = build_network(&posts, &range(1, 10));
        assert_eq!(net.edges.len(), 4);
        assert_eq!(net.edges[0].kind, EdgeKind::Retweet);
        assert_eq!(net.edges[0].src, "u");
        let posters: Vec<_> = net.nodes.iter().filter(|n| n.kind == NodeKind::Poster).collect();
        assert_eq!(posters.len(), 4);
        assert!(net.node("w", NodeKind::Poster).is_some());
        // gender of a target comes from the same handle's posts
        assert_eq!(net.node("a", NodeKind::Target).unwrap().gender, Gender::Male);
        assert_eq!(net.node("u", NodeKind::Target).unwrap().gender, Gender::Female);
        assert_eq!(net.node("b", NodeKind::Target).unwrap().gender, Gender::Unknown);
        for e in &net.edges {
            assert!(net.node(&e.src, NodeKind::Poster).is_some());
            assert!(net.node(&e.dst, NodeKind::Target).is_some());
        }
    }

    #[test]
    fn timelines() {
        let posts = vec![
            post("1", "u", 1, "@a", Gender::Female),
            post("2", "u", 1, "@b", Gender::Female),
            post("3", "u", 3, "@a", Gender::Female),
        ];
        let net = build_network(&posts, &range(1, 5));
        let t = node_timelines(&net.edges, d(1), d(5), NodeKind::Poster).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].bins, vec![2, 0, 1, 0, 0]);
        let t = node_timelines(&net.edges, d(1), d(5), NodeKind::Target).unwrap();
        assert_eq!(t.iter().map(|t| t.node.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
        assert!(t.iter().all(|t| t.kind == NodeKind::Target));
        assert!(node_timelines(&[], d(1), d(5), NodeKind::Poster).unwrap().is_empty());
        assert!(matches!(
            node_timelines(&net.edges, d(5), d(1), NodeKind::Poster),
            Err(NetError::InvalidRange { .. })
        ));
    }

    #[test]
    fn kmeans_examples() {
        let pts = vec![
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![10.0, 10.0, 10.0],
            vec![10.0, 10.0, 10.0],
            vec![10.0, 10.0, 10.0],
        ];
        let r = kmeans(&pts, 2, 7, 100).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert_eq!(r.assignments[0], r.assignments[2]);
        assert_eq!(r.assignments[3], r.assignments[5]);
        assert_ne!(r.assignments[0], r.assignments[3]);

        let pts = vec![vec![1.0, 2.0], vec![3.0, 6.0], vec![5.0, 1.0]];
        let r = kmeans(&pts, 1, 0, 100).unwrap();
        assert_eq!(r.centroids, vec![vec![3.0, 3.0]]);

        assert!(matches!(kmeans(&pts, 4, 0, 100), Err(NetError::InvalidParameter(_))));
        assert!(kmeans(&pts, 0, 0, 100).is_err());
        assert_eq!(kmeans(&pts, 2, 9, 100).unwrap(), kmeans(&pts, 2, 9, 100).unwrap());
    }

    #[test]
    fn duplicate_points_with_k_equal_n() {
        let pts = vec![vec![1.0], vec![1.0], vec![1.0]];
        let r = kmeans(&pts, 3, 1, 100).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut a = r.assignments.clone();
        a.sort_unstable();
        assert_eq!(a, vec![0, 1, 2]);
    }

    fn brute_force_2(points: &[Vec<f64>]) -> f64 {
        let n = points.len();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let assign: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let (c, _) = means(points, &assign, 2, points[0].len());
            best = best.min(inertia_of(points, &assign, &c));
        }
        best
    }

    #[test]
    fn six_point_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for case in 0..300 {
            let pts: Vec<Vec<f64>> = (0..6)
                .map(|_| vec![rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)])
                .collect();
            let r = kmeans(&pts, 2, case, 100).unwrap();
            let oracle = brute_force_2(&pts);
            assert!(
                (r.inertia - oracle).abs() <= 1e-9 * oracle.max(1.0),
                "case {case}: {} vs {oracle}",
                r.inertia
            );
        }
    }

    #[test]
    fn aggregation_and_split() {
        let iv = range(1, 2);
        let tl = |node: &str, bins: Vec<u32>| LinkTimeline {
            node: node.into(),
            kind: NodeKind::Poster,
            interval: iv,
            bins,
        };
        let timelines = vec![tl("a", vec![1, 0]), tl("b", vec![0, 2]), tl("c", vec![5, 5])];
        let result = KMeansResult {
            assignments: vec![0, 0, 1],
            centroids: vec![vec![0.5, 1.0], vec![5.0, 5.0], vec![9.0, 9.0]],
            inertia: 0.0,
            history: vec![0.0],
            iterations: 1,
        };
        let clusters = profile_aggregate(&result, &timelines);
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].aggregate, vec![1, 2]);
        assert_eq!(clusters[1].aggregate, vec![5, 5]);
        assert_eq!(clusters[1].members, vec!["c"]);

        let node = |id: &str, g| ActorNode {
            id: id.into(),
            kind: NodeKind::Poster,
            gender: g,
        };
        let nodes = vec![
            node("a", Gender::Female),
            node("b", Gender::Female),
            node("c", Gender::Male),
        ];
        let split = gender_split(&nodes, &timelines);
        assert_eq!((split.female.len(), split.male.len(), split.unknown.len()), (2, 1, 0));
        let split = gender_split(&[], &timelines);
        assert_eq!(split.unknown.len(), 3);
    }

    #[test]
    fn csv_exports_have_headers() {
        assert_eq!(edges_to_csv(&[]), "src,dst,kind,date,post_id\n");
        assert_eq!(clusters_to_csv(&[], &[]), "cluster_id,node_id,kind,gender\n");
        assert_eq!(aggregates_to_csv(&[]), "cluster_id,day_index,count\n");
    }

    fn arb_posts() -> impl Strategy<Value = Vec<SocialPost>> {
        let handles = prop::sample::select(vec!["ana", "bo", "cy", "Dee", "ed"]);
        prop::collection::vec(
            (
                handles.clone(),
                1u32..15,
                prop::collection::vec(handles, 0..4),
                any::<bool>(),
            ),
            0..40,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (author, day, targets, rt))| {
                    let mut text: String = targets.iter().map(|t| format!("@{t} ")).collect();
                    if rt && !text.is_empty() {
                        text = format!("RT {text}");
                    }
                    post(&i.to_string(), author, day, &text, Gender::Unknown)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn conservation(posts in arb_posts(), a in 1u32..8, span in 0u32..8, k in 1usize..5) {
            let iv = range(a, a + span);
            let net = build_network(&posts, &range(1, 31));
            for kind in [NodeKind::Poster, NodeKind::Target] {
                let t = node_timelines(&net.edges, iv.start, iv.end, kind).unwrap();
                let bins: u64 = t.iter().map(LinkTimeline::total).sum();
                let inside = net.edges.iter().filter(|e| iv.contains(e.date())).count() as u64;
                prop_assert_eq!(bins, inside);
                if let Some(p) = profile_kind(&net, &iv, kind, &KMeansConfig { k, ..KMeansConfig::default() }).unwrap() {
                    let agg: u64 = p.clusters.iter().flat_map(|c| c.aggregate.iter()).sum();
                    prop_assert_eq!(agg, bins);
                    prop_assert_eq!(p.female + p.male + p.unknown, t.len());
                }
            }
        }

        #[test]
        fn inertia_never_increases(
            pts in prop::collection::vec(prop::collection::vec(0.0f64..20.0, 3), 2..30),
            k in 1usize..6,
            seed in any::<u64>(),
        ) {
            let k = k.min(pts.len());
            let r = kmeans(&pts, k, seed, 100).unwrap();
            for w in r.history.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            prop_assert_eq!(r.inertia, *r.history.last().unwrap());
            let (c, _) = means(&pts, &r.assignments, k, 3);
            prop_assert!((inertia_of(&pts, &r.assignments, &c) - r.inertia).abs() <= 1e-9 * r.inertia.max(1.0));
        }
    }
}
