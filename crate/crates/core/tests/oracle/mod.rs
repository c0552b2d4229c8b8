//! Independent oracles for the property checks. Each check returns a short
//! detail string on success and a description of the first mismatch on
//! failure. Shared with the cli acceptance suite.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use roadlab::geometry::{ray_cast, OrientedRect};
use roadlab::metrics::{mutual_information, required_gap};
use roadlab::optim::gae;
use roadlab::policy::{Mlp, PolicyParams, PolicyShape};
use roadlab::reward::{compute_reward, episode_return, RewardEvents};
use roadlab::sensing::{apply_dropout, LidarFrame, LIDAR_RANGE};
use roadlab::world::ACCEL_FRACTIONS;
use roadlab::{Pose, Segment, Spline, Vec2};

pub type Check = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn lerp2(p: Vec2, q: Vec2, ta: f64, tb: f64, t: f64) -> Vec2 {
    p * ((tb - t) / (tb - ta)) + q * ((t - ta) / (tb - ta))
}

/// Barry–Goldman pyramidal evaluation of the centripetal Catmull-Rom span
/// between `p[1]` and `p[2]`.
pub fn barry_goldman(p: [Vec2; 4], t: f64) -> Vec2 {
    let mut k = [0.0; 4];
    for i in 1..4 {
        k[i] = k[i - 1] + (p[i] - p[i - 1]).norm().sqrt();
    }
    let t = k[1] + t * (k[2] - k[1]);
    let a1 = lerp2(p[0], p[1], k[0], k[1], t);
    let a2 = lerp2(p[1], p[2], k[1], k[2], t);
    let a3 = lerp2(p[2], p[3], k[2], k[3], t);
    let b1 = lerp2(a1, a2, k[0], k[2], t);
    let b2 = lerp2(a2, a3, k[1], k[3], t);
    lerp2(b1, b2, k[1], k[2], t)
}

fn random_polyline(r: &mut ChaCha8Rng, n: usize) -> Vec<Vec2> {
    let mut pts = vec![Vec2::new(r.gen_range(-20.0..20.0), r.gen_range(-20.0..20.0))];
    for _ in 1..n {
        let step = Vec2::from_angle(r.gen_range(-3.1..3.1)) * r.gen_range(0.5..15.0);
        pts.push(*pts.last().unwrap() + step);
    }
    pts
}

pub fn spline_oracle(cases: usize) -> Check {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let pts = random_polyline(&mut r, 6);
        let s = Spline::new(pts.clone()).map_err(|e| format!("case {case}: {e}"))?;
        let k = s.knots();
        for i in 1..=4 {
            let d = s.eval(k[i]).unwrap().distance(pts[i]);
            if d > 1e-9 {
                return Err(format!("case {case}: knot {i} misses its control point by {d:e}"));
            }
        }
        for span in 1..=3 {
            for _ in 0..10 {
                let f: f64 = r.gen();
                let u = k[span] + f * (k[span + 1] - k[span]);
                let want = barry_goldman([pts[span - 1], pts[span], pts[span + 1], pts[span + 2]], f);
                let d = s.eval(u).unwrap().distance(want);
                worst = worst.max(d);
                if d > 1e-9 {
                    return Err(format!("case {case} span {span} f={f}: off by {d:e}"));
                }
            }
        }
    }
    Ok(format!("{cases} splines, max deviation {worst:.1e}"))
}

/// Ray–segment distance from an explicit 2×2 solve.
fn ray_segment_oracle(o: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    // o + t·dir = a + u·(b − a)  ⇔  [dir, a − b]·[t, u]ᵀ = a − o
    let (m00, m01, m10, m11) = (dir.x, a.x - b.x, dir.y, a.y - b.y);
    let det = m00 * m11 - m01 * m10;
    if det.abs() < 1e-12 {
        return None;
    }
    let (rx, ry) = (a.x - o.x, a.y - o.y);
    let t = (rx * m11 - m01 * ry) / det;
    let u = (m00 * ry - rx * m10) / det;
    (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// Entry distance of a ray into a rectangle by the slab method in the
/// rectangle's frame, for origins outside the rectangle.
fn ray_rect_oracle(o: Vec2, dir: Vec2, rect: &OrientedRect) -> Option<f64> {
    let lo = (o - rect.pose.position).rotate(-rect.pose.heading);
    let ld = dir.rotate(-rect.pose.heading);
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for (p, d, h) in [(lo.x, ld.x, rect.half_extents.x), (lo.y, ld.y, rect.half_extents.y)] {
        if d.abs() < 1e-15 {
            if p.abs() > h {
                return None;
            }
            continue;
        }
        let (a, b) = ((-h - p) / d, (h - p) / d);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t0 <= t1).then_some(t0)
}

pub fn lidar_oracle(cases: usize) -> Check {
    let mut r = rng(2);
    let mut hits = 0;
    for case in 0..cases {
        let o = Vec2::new(r.gen_range(-30.0..30.0), r.gen_range(-30.0..30.0));
        let theta: f64 = r.gen_range(-3.2..3.2);
        let dir = Vec2::from_angle(theta);
        let a = Vec2::new(r.gen_range(-40.0..40.0), r.gen_range(-40.0..40.0));
        let b = Vec2::new(r.gen_range(-40.0..40.0), r.gen_range(-40.0..40.0));
        let seg = Segment::new(a, b).map_err(|e| e.to_string())?;
        let want = ray_segment_oracle(o, dir, a, b).map_or(LIDAR_RANGE, |t| t.min(LIDAR_RANGE));
        let got = ray_cast(o, theta, &[seg], LIDAR_RANGE);
        if (got - want).abs() > 1e-9 {
            return Err(format!("segment case {case}: got {got}, want {want}"));
        }

        let rect = OrientedRect::new(
            Pose::new(Vec2::new(r.gen_range(-25.0..25.0), r.gen_range(-25.0..25.0)), r.gen_range(-3.2..3.2)),
            Vec2::new(r.gen_range(0.5..5.0), r.gen_range(0.5..5.0)),
        );
        if rect.contains(o) {
            continue;
        }
        let want = ray_rect_oracle(o, dir, &rect).map_or(LIDAR_RANGE, |t| t.min(LIDAR_RANGE));
        let got = ray_cast(o, theta, &rect.edges(), LIDAR_RANGE);
        if (got - want).abs() > 1e-9 {
            return Err(format!("rectangle case {case}: got {got}, want {want}"));
        }
        hits += (want < LIDAR_RANGE) as usize;
    }
    let miss = ray_cast(Vec2::ZERO, 0.0, &[], LIDAR_RANGE);
    if miss != LIDAR_RANGE {
        return Err(format!("empty scene returned {miss}"));
    }
    Ok(format!("{cases} configurations, {hits} rectangle hits, miss = {miss}"))
}

pub fn dropout_oracle(frames: usize, n_rays: usize, pct: f64) -> Check {
    let mut r = rng(3);
    let expect = (pct * n_rays as f64 / 100.0).round() as usize;
    let mut drops = vec![0usize; n_rays];
    for f in 0..frames {
        let out = apply_dropout(LidarFrame { ranges: vec![7.0; n_rays] }, pct, &mut r);
        let zeros = out.ranges.iter().filter(|&&x| x == 0.0).count();
        if zeros != expect {
            return Err(format!("frame {f}: {zeros} zeros, want {expect}"));
        }
        for (d, x) in drops.iter_mut().zip(&out.ranges) {
            *d += (*x == 0.0) as usize;
        }
    }
    let worst = drops
        .iter()
        .map(|&d| (d as f64 / frames as f64 - pct / 100.0).abs())
        .fold(0.0, f64::max);
    if worst > 0.02 {
        return Err(format!("per-ray drop frequency off by {worst:.4}"));
    }
    Ok(format!("{frames} frames, max frequency error {worst:.4}"))
}

pub fn reward_fuzz(episodes: usize) -> Check {
    let mut r = rng(4);
    for e in 0..episodes {
        let horizon: u32 = r.gen_range(1..=300);
        let a_max: f64 = r.gen_range(0.5..5.0);
        let len = r.gen_range(1..=horizon);
        let d0: f64 = r.gen_range(1.0..100.0);
        let end_event = r.gen_range(0..3);
        let mut prev = 0.0;
        let mut steps = Vec::with_capacity(len as usize);
        for t in 0..len {
            let accel = ACCEL_FRACTIONS[r.gen_range(0..ACCEL_FRACTIONS.len())] * a_max;
            let last = t + 1 == len;
            let events = RewardEvents {
                reached_goal: last && end_event == 1,
                first_collision: last && end_event == 2,
            };
            // Distances may exceed d0 (driving away) and are clamped.
            let now = r.gen_range(0.0..1.5 * d0);
            steps.push(compute_reward(prev, accel, events, now, d0, horizon, a_max));
            prev = accel;
        }
        let sum = episode_return(&steps).map_err(|err| format!("episode {e}: {err}"))?;
        let in_unit = |x: f64| (-1.0 - 1e-9..=0.0).contains(&x);
        if !(in_unit(sum.smoothness) && in_unit(sum.progress)) {
            return Err(format!("episode {e}: penalties {sum:?}"));
        }
        if ![0.0, 1.0].contains(&sum.goal) || ![0.0, -1.0].contains(&sum.collision) {
            return Err(format!("episode {e}: events {sum:?}"));
        }
    }
    Ok(format!("{episodes} episodes, 0 violations"))
}

/// Advantage as the explicit double sum Σ_l (γλ)^l δ_{t+l}, truncated at the
/// first terminal transition.
fn gae_brute(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, g: f64, l: f64) -> Vec<f64> {
    let n = rewards.len();
    let delta = |k: usize| {
        let next = if dones[k] {
            0.0
        } else if k + 1 < n {
            values[k + 1]
        } else {
            bootstrap
        };
        rewards[k] + g * next - values[k]
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for k in t..n {
                sum += (g * l).powi((k - t) as i32) * delta(k);
                if dones[k] {
                    break;
                }
            }
            sum
        })
        .collect()
}

pub fn gae_oracle(tapes: usize) -> Check {
    let mut r = rng(5);
    for tape in 0..tapes {
        let n = r.gen_range(1..=50);
        let rewards: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let dones: Vec<bool> = (0..n).map(|_| r.gen_bool(0.1)).collect();
        let (g, l, b) = (r.gen_range(0.5..1.0), r.gen_range(0.0..1.0), r.gen_range(-2.0..2.0));
        let (adv, ret) = gae(&rewards, &values, &dones, b, g, l);
        let want = gae_brute(&rewards, &values, &dones, b, g, l);
        for t in 0..n {
            if (adv[t] - want[t]).abs() > 1e-9 || (ret[t] - (want[t] + values[t])).abs() > 1e-9 {
                return Err(format!("tape {tape} t={t}: {} vs {}", adv[t], want[t]));
            }
        }
    }
    Ok(format!("{tapes} tapes"))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compares `analytic` with central differences of `loss` over every
/// parameter reachable through `params`.
fn fd_compare<P: Clone>(
    params: &P,
    analytic: &[f64],
    slices: fn(&mut P) -> Vec<&mut [f64]>,
    loss: &dyn Fn(&P) -> f64,
) -> Result<f64, String> {
    let h = 1e-6;
    let mut idx = 0;
    let mut worst = 0.0f64;
    let mut work = params.clone();
    let n: usize = slices(&mut work).iter().map(|s| s.len()).sum();
    for k in 0..n {
        let bump = |p: &mut P, d: f64| {
            let mut rem = k;
            for s in slices(p) {
                if rem < s.len() {
                    s[rem] += d;
                    return;
                }
                rem -= s.len();
            }
        };
        let mut plus = params.clone();
        bump(&mut plus, h);
        let mut minus = params.clone();
        bump(&mut minus, -h);
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
        let e = rel_err(analytic[idx], numeric);
        if e >= 1e-4 {
            return Err(format!("parameter {k}: analytic {} numeric {numeric}", analytic[idx]));
        }
        worst = worst.max(e);
        idx += 1;
    }
    Ok(worst)
}

fn flatten(slices: Vec<&[f64]>) -> Vec<f64> {
    slices.into_iter().flatten().copied().collect()
}

fn critic_slices(p: &mut PolicyParams) -> Vec<&mut [f64]> {
    let mut v = p.critic_encoder.slices_mut();
    v.extend(p.critic_head.slices_mut());
    v
}

pub fn gradient_check(cases: usize) -> Check {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for case in 0..cases {
        // Plain MLP under a random linear read-out.
        let depth = r.gen_range(1..=3);
        let mut sizes = vec![r.gen_range(1..=6)];
        for _ in 0..depth {
            sizes.push(r.gen_range(1..=6));
        }
        let tanh_out = r.gen_bool(0.5);
        let net = Mlp::glorot(&sizes, tanh_out, &mut r);
        let x: Vec<f64> = (0..sizes[0]).map(|_| r.gen_range(-2.0..2.0)).collect();
        let c: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mut grads = net.zeros_like();
        net.backward(&net.forward_cached(&x), &c, &mut grads);
        let loss = |m: &Mlp| m.forward(&x).iter().zip(&c).map(|(y, c)| y * c).sum::<f64>();
        worst = worst.max(
            fd_compare(&net, &flatten(grads.slices()), |m| m.slices_mut(), &loss).map_err(|e| format!("mlp case {case}: {e}"))?,
        );

        // Mean-pooled critic over a random group.
        let shape = PolicyShape {
            accel_inputs: r.gen_range(1..=5),
            spline_inputs: 2,
            hidden: r.gen_range(1..=4),
            comm: false,
        };
        let params = PolicyParams::new(shape, &mut r);
        let m = r.gen_range(1..=4);
        let obs: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..shape.accel_inputs).map(|_| r.gen_range(-2.0..2.0)).collect())
            .collect();
        let refs: Vec<&[f64]> = obs.iter().map(Vec::as_slice).collect();
        let dv: Vec<f64> = (0..m).map(|_| r.gen_range(-1.0..1.0)).collect();
        let (_, cache) = params.critic_group(&refs).map_err(|e| e.to_string())?;
        let mut g = params.zeros_like();
        params.critic_group_backward(&cache, &dv, &mut g);
        let mut analytic = flatten(g.critic_encoder.slices());
        analytic.extend(flatten(g.critic_head.slices()));
        let loss = |p: &PolicyParams| {
            let (v, _) = p.critic_group(&refs).unwrap();
            v.iter().zip(&dv).map(|(a, b)| a * b).sum::<f64>()
        };
        worst = worst.max(fd_compare(&params, &analytic, critic_slices, &loss).map_err(|e| format!("critic case {case}: {e}"))?);
    }
    Ok(format!("{cases} cases, max relative error {worst:.1e}"))
}

pub fn permutation_invariance(cases: usize) -> Check {
    let mut r = rng(7);
    for case in 0..cases {
        let shape = PolicyShape {
            accel_inputs: r.gen_range(1..=8),
            spline_inputs: 2,
            hidden: r.gen_range(2..=8),
            comm: false,
        };
        let params = PolicyParams::new(shape, &mut r);
        let m = r.gen_range(2..=8);
        let obs: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..shape.accel_inputs).map(|_| r.gen_range(-3.0..3.0)).collect())
            .collect();
        let mut perm: Vec<usize> = (0..m).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let refs: Vec<&[f64]> = obs.iter().map(Vec::as_slice).collect();
        let shuffled: Vec<&[f64]> = perm.iter().map(|&i| refs[i]).collect();
        let (base, _) = params.critic_group(&refs).map_err(|e| e.to_string())?;
        let (moved, _) = params.critic_group(&shuffled).map_err(|e| e.to_string())?;
        for (slot, &i) in perm.iter().enumerate() {
            if moved[slot].to_bits() != base[i].to_bits() {
                return Err(format!("case {case}: agent {i} value changed under permutation"));
            }
            let single = params.forward_critic(refs[i], &shuffled).map_err(|e| e.to_string())?;
            if single.to_bits() != base[i].to_bits() {
                return Err(format!("case {case}: forward_critic disagrees for agent {i}"));
            }
        }
    }
    Ok(format!("{cases} cases, 0 differences"))
}

/// Closed-form mutual information (bits) of a joint probability table.
pub fn mi_closed_form(joint: &[Vec<f64>]) -> f64 {
    let px: Vec<f64> = joint.iter().map(|row| row.iter().sum()).collect();
    let py: Vec<f64> = (0..joint[0].len()).map(|j| joint.iter().map(|row| row[j]).sum()).collect();
    let mut mi = 0.0;
    for (i, row) in joint.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (px[i] * py[j])).log2();
            }
        }
    }
    mi
}

pub fn mi_oracle(samples: usize) -> Check {
    let tables: Vec<Vec<Vec<f64>>> = vec![
        vec![vec![0.4, 0.1], vec![0.1, 0.4]],
        vec![vec![0.5, 0.0], vec![0.0, 0.5]],
        vec![vec![0.25, 0.25], vec![0.25, 0.25]],
        vec![vec![0.2, 0.1, 0.05, 0.1, 0.05], vec![0.02, 0.08, 0.2, 0.1, 0.1]],
    ];
    let mut r = rng(8);
    let mut details = Vec::new();
    for joint in &tables {
        let ny = joint[0].len();
        let cells: Vec<f64> = joint.iter().flatten().copied().collect();
        let pairs: Vec<(usize, usize)> = (0..samples)
            .map(|_| {
                let mut u: f64 = r.gen();
                let mut k = 0;
                while k + 1 < cells.len() && u >= cells[k] {
                    u -= cells[k];
                    k += 1;
                }
                (k / ny, k % ny)
            })
            .collect();
        let want = mi_closed_form(joint);
        let got = mutual_information(&pairs, joint.len(), ny);
        if (got - want).abs() > 0.02 {
            return Err(format!("joint {joint:?}: estimate {got:.4} vs closed form {want:.4}"));
        }
        details.push(format!("{want:.4}→{got:.4}"));
    }
    Ok(details.join(", "))
}

pub fn safety_table() -> Check {
    let table = [(10.0, 5.0, 10.0), (0.0, 5.0, 0.0), (0.0, 2.5, 0.0), (5.0, 2.5, 5.0), (-4.0, 2.5, 0.0)];
    for (dv, a, want) in table {
        let got = required_gap(dv, a);
        if got != want {
            return Err(format!("Δs={dv}, a_max={a}: {got} vs {want}"));
        }
    }
    Ok(format!("{} rows exact", table.len()))
}
