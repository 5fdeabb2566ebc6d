//! Acceptance suite: one line per criterion, non-zero exit if any fails.

// `!(a <= b)` is deliberate: a NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::{Days, NaiveDate};
use floodpulse::detect::{
    DetectionEvent, EscalationConfig, EscalationInput, EscalationStage, Escalator, FloodKind, RequestKind,
};
use floodpulse::geo::{
    convex_hull, drape_stats, flood_extent, BoundingBox, GeoPoint, HydroLayer, LocalProjection, RasterGrid, RingPolygon,
};
use floodpulse::netdyn::{build_network, kmeans, node_timelines, profile_kind, KMeansConfig, LinkTimeline, NodeKind};
use floodpulse::pipeline::{self, export, generate_scenario, run, RunOutput, ScenarioSpec, ALL_FORMATS};
use floodpulse::presence::{aggregate_daily_interval, hourly_event_window, zscore, HourInterval, PresenceRecord};
use floodpulse::social::{
    normalize_awareness, EvidenceBundle, GenderHistogram, SocialProxy, SpatialProxy, TemporalEvidence,
};
use floodpulse::DateRange;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+));
        }
    };
}

const RUNTIME_LIMIT: Duration = Duration::from_secs(10);

fn scenario_run(spec: &ScenarioSpec) -> Result<(RunOutput, Duration, tempfile::TempDir), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = Instant::now();
    let g = generate_scenario(spec, dir.path()).map_err(|e| e.to_string())?;
    let out = run(&g.config).map_err(|e| e.to_string())?;
    Ok((out, t.elapsed(), dir))
}

fn day_index(spec: &ScenarioSpec, d: NaiveDate) -> i64 {
    (d - spec.start).num_days()
}

fn torrential() -> Check {
    let spec = ScenarioSpec::golden_torrential();
    let (out, took, _dir) = scenario_run(&spec)?;
    let r = &out.report;
    ensure!(r.events.len() == 1, "expected one event, got {}", r.events.len());
    let e = &r.events[0];
    let day = day_index(&spec, e.event.date);
    ensure!((39..=41).contains(&day), "event on day {day}");
    ensure!(e.class.kind == FloodKind::Torrential, "classified {:?}", e.class.kind);
    ensure!(r.reached(EscalationStage::Escalated), "ESCALATED never reached");
    ensure!(
        r.requests.iter().any(|q| q.kind == RequestKind::HourlyPresenceWindow),
        "no hourly presence request"
    );
    ensure!(took < RUNTIME_LIMIT, "took {took:?}");
    Ok(format!(
        "event day {day}, torrential (lag {:?}), {} requests, {:.2?}",
        e.class.rainfall_lag_days,
        r.requests.len(),
        took
    ))
}

fn overflow() -> Check {
    let spec = ScenarioSpec::golden_overflow();
    let (out, took, _dir) = scenario_run(&spec)?;
    ensure!(
        out.rainfall.entries.iter().all(|d| d.mm == 0.0),
        "rainfall not identically zero"
    );
    ensure!(!out.rainfall.entries.is_empty(), "no rainfall record for the gauge");
    let r = &out.report;
    ensure!(r.events.len() == 1, "expected one event, got {}", r.events.len());
    let e = &r.events[0];
    ensure!(e.class.kind == FloodKind::Overflow, "classified {:?}", e.class.kind);
    ensure!(took < RUNTIME_LIMIT, "took {took:?}");
    Ok(format!(
        "event day {}, overflow, {:.2?}",
        day_index(&spec, e.event.date),
        took
    ))
}

fn normalization() -> Check {
    let spec = ScenarioSpec::golden_overflow();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let g = generate_scenario(&spec, dir.path()).map_err(|e| e.to_string())?;
    let (data, _) = pipeline::load_inputs(&g.config).map_err(|e| e.to_string())?;
    let p = pipeline::stage_proxies(&g.config, &data).map_err(|e| e.to_string())?;
    let users = g.config.social.social_users;
    let base = normalize_awareness(&p.awareness, &p.total, users, &p.census).map_err(|e| e.to_string())?;

    let mut doubled_total = p.total.clone();
    doubled_total.entries.iter_mut().for_each(|e| e.value *= 2.0);
    let halved = normalize_awareness(&p.awareness, &doubled_total, users, &p.census).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for (a, b) in base.entries.iter().zip(&halved.entries) {
        ensure!(
            a.missing_denominator == b.missing_denominator,
            "flags differ on {}",
            a.date
        );
        if !a.missing_denominator {
            ensure!(
                b.value == a.value / 2.0,
                "{}: {} is not half of {}",
                a.date,
                b.value,
                a.value
            );
            checked += 1;
        }
    }
    ensure!(checked > 0, "no unflagged dates");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let k = 10f64.powf(rng.random_range(-3.0..3.0));
        let mut census = p.census.clone();
        census.entries.iter_mut().for_each(|e| e.value *= k);
        let scaled = normalize_awareness(&p.awareness, &p.total, users * k, &census).map_err(|e| e.to_string())?;
        for (a, b) in base.entries.iter().zip(&scaled.entries) {
            if a.value != 0.0 {
                worst = worst.max(((b.value - a.value) / a.value).abs());
            }
        }
    }
    ensure!(worst <= 1e-12, "joint scaling drifts by {worst:e}");
    Ok(format!(
        "{checked} dates halve exactly; joint scaling drift {worst:.1e}"
    ))
}

fn rect(proj: &LocalProjection, cx: f64, cy: f64, w: f64, h: f64, angle_deg: f64) -> RingPolygon {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let pts = [
        (-w / 2.0, -h / 2.0),
        (w / 2.0, -h / 2.0),
        (w / 2.0, h / 2.0),
        (-w / 2.0, h / 2.0),
    ]
    .iter()
    .map(|(x, y)| proj.unproject(x * c - y * s + cx, x * s + y * c + cy))
    .collect();
    RingPolygon::simple(pts).expect("rectangle")
}

fn segmentation_errors(angle: f64) -> Result<(Vec<f64>, f64), String> {
    let proj = LocalProjection::new(GeoPoint::new(0.0, 0.0).map_err(|e| e.to_string())?);
    let (s, c) = angle.to_radians().sin_cos();
    // pre square occupies the right-hand third of the post rectangle
    let post = rect(&proj, 0.0, 0.0, 30.0, 10.0, angle);
    let pre = rect(&proj, 10.0 * c, 10.0 * s, 10.0, 10.0, angle);
    let day = |d| NaiveDate::from_ymd_opt(2020, 1, d).expect("date");
    let pre = HydroLayer {
        id: "pre".into(),
        date: day(1),
        polygons: vec![pre],
    };
    let post = HydroLayer {
        id: "post".into(),
        date: day(2),
        polygons: vec![post],
    };
    let mut errors = Vec::new();
    let mut area_1m = 0.0;
    for cell in [4.0, 2.0, 1.0] {
        let area = flood_extent(&pre, &post, cell).map_err(|e| e.to_string())?.area_m2;
        errors.push((area - 200.0).abs());
        area_1m = area;
    }
    Ok((errors, area_1m))
}

fn segmentation() -> Check {
    let (e, area) = segmentation_errors(23.0)?;
    ensure!((area - 200.0).abs() <= 2.0, "1 m area {area}");
    ensure!(e[0] > e[1] && e[1] > e[2], "errors not strictly decreasing: {e:?}");
    let (aligned, aligned_area) = segmentation_errors(0.0)?;
    Ok(format!(
        "rotated 23 deg: |err| 4/2/1 m = {:?} m2, 1 m area {area}; axis-aligned: {:?} m2, 1 m area {aligned_area}",
        e, aligned
    ))
}

fn square(lat: f64, lon: f64, half: f64) -> RingPolygon {
    let p = |a, b| GeoPoint::new(a, b).expect("point");
    RingPolygon::simple(vec![
        p(lat - half, lon - half),
        p(lat - half, lon + half),
        p(lat + half, lon + half),
        p(lat + half, lon - half),
    ])
    .expect("square")
}

fn draping() -> Check {
    let origin = GeoPoint::new(10.0, 20.0).map_err(|e| e.to_string())?;
    let cell = 0.001;
    let flat = RasterGrid::from_fn(origin, cell, 40, 40, |_, _| 42.5).map_err(|e| e.to_string())?;
    let s = drape_stats(&square(9.98, 20.02, 0.0071), &flat).map_err(|e| e.to_string())?;
    ensure!(
        s.mean == 42.5 && s.min == 42.5 && s.max == 42.5,
        "constant raster gave {s:?}"
    );

    let gradient = 3.0;
    let ramp =
        RasterGrid::from_fn(origin, cell, 40, 40, |_, c| 100.0 + gradient * c as f64).map_err(|e| e.to_string())?;
    let analytic = |lon: f64| 100.0 + gradient * ((lon - origin.lon) / cell - 0.5);
    let p = |a, b| GeoPoint::new(a, b).expect("point");
    let shapes = vec![
        square(9.98, 20.02, 0.0071),
        square(9.975, 20.0113, 0.0033),
        RingPolygon::simple(vec![p(9.965, 20.005), p(9.99, 20.012), p(9.97, 20.031)]).expect("triangle"),
    ];
    let mut worst: f64 = 0.0;
    for poly in &shapes {
        let ext = poly.exterior();
        let centroid_lon = ext.iter().map(|q| q.lon).sum::<f64>() / ext.len() as f64;
        let st = drape_stats(poly, &ramp).map_err(|e| e.to_string())?;
        worst = worst.max((st.mean - analytic(centroid_lon)).abs());
    }
    ensure!(
        worst <= gradient / 2.0,
        "ramp mean off by {worst} (> {})",
        gradient / 2.0
    );
    Ok(format!(
        "constant exact; ramp worst deviation {worst:.3} <= {}",
        gradient / 2.0
    ))
}

fn zscores() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_mean, mut worst_sd, mut worst_affine) = (0f64, 0f64, 0f64);
    for _ in 0..200 {
        let n = rng.random_range(2..200);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let z = zscore(&xs).map_err(|e| e.to_string())?;
        let mean = z.iter().sum::<f64>() / n as f64;
        let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        worst_mean = worst_mean.max(mean.abs());
        worst_sd = worst_sd.max((sd - 1.0).abs());
        let a = rng.random_range(0.01..100.0);
        let b = rng.random_range(-100.0..100.0);
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let zy = zscore(&ys).map_err(|e| e.to_string())?;
        for (u, v) in z.iter().zip(&zy) {
            worst_affine = worst_affine.max((u - v).abs());
        }
    }
    ensure!(worst_mean <= 1e-9, "mean {worst_mean:e}");
    ensure!(worst_sd <= 1e-9, "sd {worst_sd:e}");
    ensure!(worst_affine <= 1e-9, "affine {worst_affine:e}");
    ensure!(
        zscore(&[7.0; 12]).map_err(|e| e.to_string())? == vec![0.0; 12],
        "constant series"
    );
    ensure!(
        zscore(&[3.5]).map_err(|e| e.to_string())? == vec![0.0],
        "singleton series"
    );
    Ok(format!(
        "mean {worst_mean:.1e}, sd {worst_sd:.1e}, affine {worst_affine:.1e}; constant/singleton zero"
    ))
}

fn brute_force_two(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) - 1 {
        let mut cost = 0.0;
        for side in [0, 1] {
            let members: Vec<&Vec<f64>> = (0..n).filter(|i| (mask >> i) & 1 == side).map(|i| &points[i]).collect();
            let dim = points[0].len();
            let centroid: Vec<f64> = (0..dim)
                .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
                .collect();
            cost += members
                .iter()
                .map(|p| p.iter().zip(&centroid).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .sum::<f64>();
        }
        best = best.min(cost);
    }
    best
}

fn kmeans_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for inst in 0..100u64 {
        let n = rng.random_range(5..60);
        let dim = rng.random_range(1..12);
        let k = rng.random_range(1..6usize).min(n);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(0.0..20.0)).collect())
            .collect();
        let r = kmeans(&pts, k, inst, 100).map_err(|e| e.to_string())?;
        for w in r.history.windows(2) {
            ensure!(w[1] <= w[0], "instance {inst}: inertia rose {} -> {}", w[0], w[1]);
        }
        let again = kmeans(&pts, k, inst, 100).map_err(|e| e.to_string())?;
        ensure!(again == r, "instance {inst}: not reproducible");
        ensure!(
            again.inertia.to_bits() == r.inertia.to_bits(),
            "instance {inst}: inertia bits differ"
        );
    }
    let mut fixtures = 0;
    for f in 0..500u64 {
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|_| vec![rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)])
            .collect();
        let r = kmeans(&pts, 2, f, 100).map_err(|e| e.to_string())?;
        let oracle = brute_force_two(&pts);
        ensure!(
            (r.inertia - oracle).abs() <= 1e-9 * oracle.max(1.0),
            "fixture {f}: inertia {} vs oracle {oracle}",
            r.inertia
        );
        fixtures += 1;
    }
    Ok(format!(
        "100 monotone+reproducible instances; {fixtures} six-point fixtures match the oracle"
    ))
}

fn network() -> Check {
    let spec = ScenarioSpec::golden_torrential();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let g = generate_scenario(&spec, dir.path()).map_err(|e| e.to_string())?;
    let (data, _) = pipeline::load_inputs(&g.config).map_err(|e| e.to_string())?;
    let range = g.config.range().map_err(|e| e.to_string())?;
    let net = build_network(&data.posts, &range);
    let mut lines = Vec::new();
    for (a, b) in [(0u64, 89u64), (30, 50), (40, 40)] {
        let iv = DateRange::new(range.start + Days::new(a), range.start + Days::new(b)).map_err(|e| e.to_string())?;
        let inside = net.edges.iter().filter(|e| iv.contains(e.date())).count() as u64;
        for kind in [NodeKind::Poster, NodeKind::Target] {
            let t = node_timelines(&net.edges, iv.start, iv.end, kind).map_err(|e| e.to_string())?;
            let bins: u64 = t.iter().map(LinkTimeline::total).sum();
            ensure!(bins == inside, "{kind:?} {iv:?}: bins {bins} vs edges {inside}");
            let p = profile_kind(&net, &iv, kind, &KMeansConfig::default())
                .map_err(|e| e.to_string())?
                .ok_or("no active nodes")?;
            let agg: u64 = p.clusters.iter().flat_map(|c| c.aggregate.iter()).sum();
            ensure!(agg == bins, "{kind:?}: aggregates {agg} vs timelines {bins}");
        }
        lines.push(format!("{}d:{inside}", iv.num_days()));
    }
    Ok(format!("edges per interval {}", lines.join(", ")))
}

fn evidence(date: NaiveDate, complete: bool) -> EvidenceBundle {
    let p = |a, b| GeoPoint::new(a, b).expect("point");
    let pts = [p(0.0, 0.0), p(0.0, 1.0), p(1.0, 0.4)];
    EvidenceBundle {
        temporal: TemporalEvidence {
            event_date: date,
            z_peak: 4.0,
        },
        spatial: complete.then(|| SpatialProxy {
            bbox: BoundingBox::from_points(&pts).expect("bbox"),
            hull: convex_hull(&pts).ok(),
        }),
        social: SocialProxy {
            distinct_users: 5,
            genders: GenderHistogram {
                female: 2,
                male: 2,
                unknown: 1,
            },
        },
    }
}

fn escalation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let start = NaiveDate::from_ymd_opt(2017, 3, 1).expect("date");
    let mut total_requests = 0;
    for seq in 0..2000 {
        let mut m = Escalator::new(EscalationConfig::default(), start);
        let mut today = start;
        let mut complete_for: Option<NaiveDate> = None;
        for _ in 0..rng.random_range(1..40) {
            today = today + Days::new(rng.random_range(0..4));
            let stage = m.stage();
            let input = match (stage, rng.random_range(0..4)) {
                (_, 0) | (EscalationStage::Idle, _) => EscalationInput::Detection(DetectionEvent {
                    date: today,
                    z_peak: 5.0,
                    proxy_value: 1.0,
                    source_series: "normalized_awareness".into(),
                }),
                (EscalationStage::Warning, _) => {
                    let date = m.event.as_ref().expect("event in warning").date;
                    EscalationInput::Evidence(evidence(date, rng.random_bool(0.6)))
                }
                (EscalationStage::Escalated, _) => EscalationInput::DataRegistered,
                (EscalationStage::Monitoring, _) => EscalationInput::Quiescent {
                    days: rng.random_range(0..30),
                },
                (EscalationStage::Evaluation, _) => EscalationInput::ReportIssued,
            };
            let (next, reqs) = m.step(&input, today).map_err(|e| format!("sequence {seq}: {e}"))?;
            match &input {
                EscalationInput::Detection(_) => complete_for = None,
                EscalationInput::Evidence(b) if b.is_complete() => complete_for = Some(b.temporal.event_date),
                _ => {}
            }
            for r in &reqs {
                ensure!(stage != EscalationStage::Idle, "sequence {seq}: request while idle");
                ensure!(
                    complete_for == Some(r.event.date),
                    "sequence {seq}: request without complete evidence"
                );
                ensure!(
                    r.evidence.is_complete() && r.evidence.social.distinct_users > 0,
                    "sequence {seq}: empty evidence bundle"
                );
                if r.kind == RequestKind::HourlyPresenceWindow {
                    ensure!(
                        r.window == DateRange::around(r.event.date, 3),
                        "sequence {seq}: hourly window {:?}",
                        r.window
                    );
                    ensure!(r.window.num_days() == 7, "hourly window is not event +- 3 days");
                }
            }
            total_requests += reqs.len();
            m = next;
        }
    }
    ensure!(total_requests > 0, "no request was ever emitted");
    Ok(format!("2000 random sequences, {total_requests} requests checked"))
}

fn presence_boundaries() -> Check {
    let c = 6.0;
    let loc = GeoPoint::new(4.6, -74.1).map_err(|e| e.to_string())?;
    let first = NaiveDate::from_ymd_opt(2017, 3, 28).expect("date");
    let mut records = Vec::new();
    for d in 0..7u64 {
        for hour in 0..24u8 {
            records.push(PresenceRecord::new("A1", loc, first + Days::new(d), hour, c).map_err(|e| e.to_string())?);
        }
    }
    let daily = aggregate_daily_interval(&records, HourInterval::EVENING);
    ensure!(
        daily.len() == 1 && daily[0].entries.len() == 7,
        "unexpected daily shape"
    );
    ensure!(
        daily[0].entries.iter().all(|e| e.value == 4.0 * c),
        "evening sums differ from 4c"
    );
    let window = hourly_event_window(&records, first + Days::new(3), 3, HourInterval::NIGHT);
    ensure!(window.len() == 1, "expected one antenna");
    let slots = &window[0].slots;
    ensure!(slots.len() == 119, "{} slots", slots.len());
    ensure!(slots.iter().all(|s| s.value == Some(c)), "gaps in complete data");
    Ok(format!(
        "evening sum {} = 4c; {} hourly slots",
        daily[0].entries[0].value,
        slots.len()
    ))
}

fn files_in(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        let bytes = std::fs::read(entry.path()).map_err(|e| e.to_string())?;
        out.insert(entry.file_name().to_string_lossy().into_owned(), bytes);
    }
    Ok(out)
}

fn determinism() -> Check {
    let spec = ScenarioSpec::golden_torrential();
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let g = generate_scenario(&spec, &dir.path().join("data")).map_err(|e| e.to_string())?;
        let out = run(&g.config).map_err(|e| e.to_string())?;
        export(&out, &dir.path().join("out"), &ALL_FORMATS).map_err(|e| e.to_string())?;
        snapshots.push((files_in(&dir.path().join("data"))?, files_in(&dir.path().join("out"))?));
    }
    let (a, b) = (&snapshots[0], &snapshots[1]);
    ensure!(a.0 == b.0, "generated datasets differ");
    ensure!(a.1.keys().eq(b.1.keys()), "export file sets differ");
    for (name, bytes) in &a.1 {
        ensure!(b.1[name] == *bytes, "{name} differs between runs");
    }
    ensure!(a.1.contains_key("report.json"), "no report written");
    Ok(format!(
        "{} dataset files and {} exports byte-identical",
        a.0.len(),
        a.1.len()
    ))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("torrential scenario", torrential),
        ("overflow scenario", overflow),
        ("normalization laws", normalization),
        ("segmentation accuracy", segmentation),
        ("DEM draping", draping),
        ("z-score suite", zscores),
        ("k-means", kmeans_suite),
        ("network conservation", network),
        ("escalation", escalation),
        ("presence boundaries", presence_boundaries),
        ("end-to-end determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("[PASS] {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
