//! Krein signatures of imaginary eigenvalues, continuation of eigenvalue
//! branches in μ, and the completeness certificate of the instability search.

use crate::evans::{
    axis_zero_scan_with, AxisZero, polish_zero, unstable_count, winding_number, zeros_in_rectangle, ContourPath, EvansContext,
    EvansError, EvansOptions, Piece, SpectralFunction,
};
use crate::linearized::{eigenfunction_solve, Eigenfunction, LinearError, ModeSystem};
use crate::profile::{Branch, ProfileError, VortexProfile};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};
use thiserror::Error;

/// Krein signature of an eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum Signature {
    Positive,
    Negative,
    /// Imaginary eigenvalue whose energy form is numerically degenerate.
    Indefinite,
    /// Off-axis eigenvalue (the energy form vanishes).
    Zero,
    /// λ = 0, where the form degenerates.
    AtOrigin,
}

impl Signature {
    pub fn as_str(self) -> &'static str {
        match self {
            Signature::Positive => "positive",
            Signature::Negative => "negative",
            Signature::Indefinite => "indefinite",
            Signature::Zero => "zero",
            Signature::AtOrigin => "at-origin",
        }
    }

    pub fn is_definite(self) -> bool {
        matches!(self, Signature::Positive | Signature::Negative)
    }

    /// The opposite definite signature; other values map to themselves.
    pub fn flipped(self) -> Signature {
        match self {
            Signature::Positive => Signature::Negative,
            Signature::Negative => Signature::Positive,
            s => s,
        }
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Error)]
pub enum KreinError {
    #[error(transparent)]
    Evans(#[from] EvansError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("lambda = {re} + {im}i is not on the imaginary axis")]
    OffAxis { re: f64, im: f64 },
    #[error("track lost at mu = {mu}: {reason}")]
    TrackLost { mu: f64, reason: String, last: Box<EigRecord> },
    #[error("eigenvalue {re} + {im}i at mu = {mu} violates |Re lambda| < 3(mu - m)")]
    BoundViolation { mu: f64, re: f64, im: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Checks the a-priori bound |Re λ| < 3(μ − m) on eigenvalues of a vortex of degree m.
pub fn check_eigenvalue_bound(m: u32, mu: f64, lambda: C64) -> Result<(), KreinError> {
    if lambda.re.abs() < 3.0 * (mu - m as f64) {
        Ok(())
    } else {
        Err(KreinError::BoundViolation { mu, re: lambda.re, im: lambda.im })
    }
}

/// An eigenvalue of mode j at chemical potential μ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigRecord {
    pub lambda: C64,
    pub j: i32,
    pub mu: f64,
    pub multiplicity: u32,
    pub signature: Signature,
}

impl EigRecord {
    pub fn on_axis(&self) -> bool {
        self.signature != Signature::Zero
    }
}

/// Relative size of Q below which the energy form is reported as degenerate.
pub const DEGENERATE_Q: f64 = 1e-8;

/// |β| below which an imaginary eigenvalue is labelled at-origin.
pub const ORIGIN_TOL: f64 = 1e-7;

/// Q = ∫(|y₊|² − |y₋|²) r dr together with ‖y‖² = ∫(|y₊|² + |y₋|²) r dr.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KreinForm {
    pub q: f64,
    pub norm: f64,
}

pub fn krein_form(eig: &Eigenfunction) -> KreinForm {
    KreinForm { q: eig.krein_integral(), norm: eig.norm_integral() }
}

/// Krein signature of the imaginary eigenvalue λ = iβ from its eigenfunction:
/// sign(−β·Q), which is the sign of the energy form (L y, y).
pub fn signature_of(lambda: C64, eig: &Eigenfunction) -> Result<Signature, KreinError> {
    if lambda.re.abs() > 1e-8 * (1.0 + lambda.norm()) {
        return Err(KreinError::OffAxis { re: lambda.re, im: lambda.im });
    }
    let beta = lambda.im;
    if beta.abs() < ORIGIN_TOL {
        return Ok(Signature::AtOrigin);
    }
    let form = krein_form(eig);
    if form.q.abs() < DEGENERATE_Q * form.norm {
        return Ok(Signature::Indefinite);
    }
    Ok(if -beta * form.q > 0.0 { Signature::Positive } else { Signature::Negative })
}

/// Solves for the eigenfunction of mode j at λ and returns its signature and
/// energy form. Off-axis λ yield [`Signature::Zero`]; eigenfunctions that
/// cannot be isolated (near collisions) yield [`Signature::Indefinite`].
pub fn signature_at(profile: &VortexProfile, j: i32, lambda: C64) -> Result<(Signature, Option<KreinForm>), KreinError> {
    let sys = ModeSystem::new(profile, j, lambda);
    let eig = match eigenfunction_solve(&sys) {
        Ok(e) => e,
        Err(LinearError::NonSimple { .. }) | Err(LinearError::NotEigenvalue { .. }) => {
            return Ok((Signature::Indefinite, None));
        }
        Err(e) => return Err(e.into()),
    };
    let form = krein_form(&eig);
    if lambda.re.abs() > 1e-8 * (1.0 + lambda.norm()) {
        return Ok((Signature::Zero, Some(form)));
    }
    Ok((signature_of(lambda, &eig)?, Some(form)))
}

// ---------------------------------------------------------------------------
// Seed table at the bifurcation point
// ---------------------------------------------------------------------------

/// Imaginary eigenvalues at μ = m + 1 (zero profile) for 1 ≤ j ≤ 2m with
/// |Im λ| ≤ 6, with the signatures of their energy forms.
pub fn seed_table(m: u32) -> Vec<EigRecord> {
    seed_table_window(m, 1..=2 * m as i32, 6.0)
}

/// Seed eigenvalues for modes `js` with |Im λ| ≤ y.
///
/// The u-family λ = −i(j + 2n) has energy j + 2n; the v-family
/// λ = i(k + 2n) with k = −j (j < m) or k = j − 2m (j ≥ m) has energy k + 2n.
/// Coincident eigenvalues of the two families are listed separately with
/// multiplicity 2.
pub fn seed_table_window(m: u32, js: std::ops::RangeInclusive<i32>, y: f64) -> Vec<EigRecord> {
    let mu = m as f64 + 1.0;
    let mi = m as i32;
    let sig = |energy: i32| match energy.cmp(&0) {
        std::cmp::Ordering::Greater => Signature::Positive,
        std::cmp::Ordering::Less => Signature::Negative,
        std::cmp::Ordering::Equal => Signature::AtOrigin,
    };
    let mut out = Vec::new();
    for j in js {
        if j <= 0 {
            continue;
        }
        let k = if j < mi { -j } else { j - 2 * mi };
        let mut recs: Vec<(i32, Signature)> = Vec::new();
        for n in 0.. {
            let e = j + 2 * n;
            if e as f64 > y {
                break;
            }
            recs.push((-e, sig(e)));
        }
        for n in 0.. {
            let e = k + 2 * n;
            if e as f64 > y {
                break;
            }
            if (e as f64) < -y {
                continue;
            }
            recs.push((e, sig(e)));
        }
        recs.sort();
        for &(beta, s) in &recs {
            let mult = recs.iter().filter(|r| r.0 == beta).count() as u32;
            out.push(EigRecord { lambda: C64::new(0.0, beta as f64), j, mu, multiplicity: mult, signature: s });
        }
    }
    out
}

/// The negative-signature seeds with 0 < j < 2m, the starting points of the
/// branches that must be followed.
pub fn negative_seeds(m: u32) -> Vec<EigRecord> {
    seed_table(m)
        .into_iter()
        .filter(|r| r.signature == Signature::Negative && r.j > 0 && r.j < 2 * m as i32)
        .collect()
}

/// A seed eigenvalue and the eigenvalue found near it on a nearby profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedMatch {
    pub seed: EigRecord,
    pub computed: Option<EigRecord>,
}

impl SeedMatch {
    /// The computed signature equals the seed's. Seeds at the origin carry
    /// zero energy and may move to either side, so any computed eigenvalue
    /// matches them.
    pub fn matches(&self) -> bool {
        self.computed.is_some_and(|c| self.seed.signature == Signature::AtOrigin || c.signature == self.seed.signature)
    }
}

/// Locates the eigenvalues emanating from each seed on `profile` (μ slightly
/// above m + 1) and computes their signatures. Zeros near a seed group are
/// paired with its records by signature.
pub fn seed_signatures(profile: &VortexProfile, seeds: &[EigRecord]) -> Result<Vec<SeedMatch>, KreinError> {
    let ctx = EvansContext::new(profile, EvansOptions::default());
    let mut out = Vec::new();
    let mut done: Vec<(i32, f64)> = Vec::new();
    for s in seeds {
        let key = (s.j, s.lambda.im);
        if done.contains(&key) {
            continue;
        }
        done.push(key);
        let group: Vec<&EigRecord> = seeds.iter().filter(|r| r.j == s.j && r.lambda.im == s.lambda.im).collect();
        let f = ctx.mode(s.j);
        let scan = axis_zero_scan_with(&f, s.lambda.im - 0.05, s.lambda.im + 0.05, 101, 0.0)?;
        let mut found: Vec<EigRecord> = Vec::new();
        for z in &scan.zeros {
            let lambda = C64::new(0.0, z.im);
            let (sig, _) = signature_at(profile, s.j, lambda)?;
            found.push(EigRecord { lambda, j: s.j, mu: profile.mu, multiplicity: z.mult, signature: sig });
        }
        // Off-axis pairs near the seed count as zero signature.
        if found.len() < group.len() {
            let y0 = s.lambda.im - 0.05;
            let y1 = s.lambda.im + 0.05;
            if let Ok(zs) = zeros_in_rectangle(&f, 1e-9, 0.05, y0, y1) {
                for z in zs {
                    found.push(EigRecord { lambda: z, j: s.j, mu: profile.mu, multiplicity: 1, signature: Signature::Zero });
                }
            }
        }
        let mut used = vec![false; found.len()];
        for g in &group {
            let pick = (0..found.len())
                .filter(|&i| !used[i] && found[i].signature == g.signature)
                .min_by(|&a, &b| {
                    (found[a].lambda - g.lambda).norm().partial_cmp(&(found[b].lambda - g.lambda).norm()).unwrap()
                })
                .or_else(|| (0..found.len()).find(|&i| !used[i]));
            if let Some(i) = pick {
                used[i] = true;
            }
            out.push(SeedMatch { seed: **g, computed: pick.map(|i| found[i]) });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Profiles along the branch
// ---------------------------------------------------------------------------

/// Converged profiles along a branch, computed on demand and cached.
pub struct ProfileCache {
    branch: Branch,
    capacity: usize,
    inner: Mutex<(HashMap<u64, Arc<VortexProfile>>, VecDeque<u64>)>,
}

impl ProfileCache {
    pub fn new(branch: Branch) -> Self {
        ProfileCache { branch, capacity: 64, inner: Mutex::new((HashMap::new(), VecDeque::new())) }
    }

    pub fn m(&self) -> u32 {
        self.branch.m
    }

    pub fn branch(&self) -> &Branch {
        &self.branch
    }

    pub fn get(&self, mu: f64) -> Result<Arc<VortexProfile>, ProfileError> {
        let key = mu.to_bits();
        if let Some(p) = self.inner.lock().unwrap().0.get(&key) {
            return Ok(p.clone());
        }
        let p = if (mu - (self.branch.m as f64 + 1.0)).abs() < 1e-14 {
            Arc::new(VortexProfile::zero(self.branch.m, mu))
        } else {
            Arc::new(self.branch.profile_at(mu)?)
        };
        let mut guard = self.inner.lock().unwrap();
        let (map, order) = &mut *guard;
        if map.insert(key, p.clone()).is_none() {
            order.push_back(key);
        }
        while order.len() > self.capacity {
            if let Some(k) = order.pop_front() {
                map.remove(&k);
            }
        }
        Ok(p)
    }
}

// ---------------------------------------------------------------------------
// Branch tracking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// Approach of an opposite-signature eigenvalue within the collision radius.
    Collision,
    /// The tracked eigenvalue leaves the axis as an off-axis pair.
    Split,
    /// The off-axis pair returns to the axis.
    Rejoin,
    /// The tracked eigenvalue passes through λ = 0.
    ZeroCrossing,
    /// Approach of a same-signature eigenvalue that does not leave the axis.
    AvoidedCrossing,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Collision => "collision",
            EventKind::Split => "split",
            EventKind::Rejoin => "rejoin",
            EventKind::ZeroCrossing => "zero-crossing",
            EventKind::AvoidedCrossing => "avoided-crossing",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackEvent {
    pub mu: f64,
    pub kind: EventKind,
    pub lambda: C64,
    /// The other eigenvalue involved (collision partner), if any.
    pub partner: Option<EigRecord>,
    /// Signature of the tracked eigenvalue on the axis side of the event.
    pub tracked_signature: Signature,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchTrack {
    pub j: i32,
    pub seed: EigRecord,
    pub records: Vec<EigRecord>,
    pub events: Vec<TrackEvent>,
}

impl BranchTrack {
    /// μ-intervals during which the tracked eigenvalue is off the axis; an
    /// interval still open at the end of the track ends at its last μ.
    pub fn bubbles(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut start: Option<f64> = None;
        for e in &self.events {
            match e.kind {
                EventKind::Split => start = Some(e.mu),
                EventKind::Rejoin => {
                    if let Some(s) = start.take() {
                        out.push((s, e.mu));
                    }
                }
                _ => {}
            }
        }
        if let (Some(s), Some(last)) = (start, self.records.last()) {
            out.push((s, last.mu));
        }
        out
    }

    /// Number of split events followed by a rejoin.
    pub fn complete_cycles(&self) -> usize {
        let mut open = false;
        let mut n = 0;
        for e in &self.events {
            match e.kind {
                EventKind::Split => open = true,
                EventKind::Rejoin if open => {
                    open = false;
                    n += 1;
                }
                _ => {}
            }
        }
        n
    }

    /// Whether the tracked eigenvalue is off the axis at μ.
    pub fn off_axis_at(&self, mu: f64) -> bool {
        let i = self.records.partition_point(|r| r.mu <= mu);
        i > 0 && !self.records[i - 1].on_axis()
    }

    /// Every split and rejoin pairs opposite definite signatures.
    pub fn parity_violations(&self) -> Vec<&TrackEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Split | EventKind::Rejoin))
            .filter(|e| {
                !(e.tracked_signature.is_definite()
                    && e.partner.is_some_and(|p| p.signature == e.tracked_signature.flipped()))
            })
            .collect()
    }

    /// Records whose definite signature differs from the previous definite
    /// on-axis signature without an intervening zero crossing, split or rejoin.
    pub fn signature_violations(&self) -> Vec<&EigRecord> {
        let mut out = Vec::new();
        let mut prev: Option<(f64, Signature)> = None;
        for r in &self.records {
            if !r.signature.is_definite() {
                if r.signature == Signature::Zero {
                    prev = None;
                }
                continue;
            }
            if let Some((mu0, s0)) = prev {
                if s0 != r.signature {
                    let explained = self.events.iter().any(|e| {
                        e.mu > mu0 - 1e-12
                            && e.mu <= r.mu + 1e-12
                            && matches!(e.kind, EventKind::ZeroCrossing | EventKind::Split | EventKind::Rejoin)
                    });
                    if !explained {
                        out.push(r);
                    }
                }
            }
            prev = Some((r.mu, r.signature));
        }
        out
    }

    /// Whether a zero crossing was logged in (a, b].
    pub fn crossings_in(&self, a: f64, b: f64) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::ZeroCrossing && e.mu > a && e.mu <= b).count()
    }
}

/// Settings of [`track_branch`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackSettings {
    /// Nominal μ step.
    pub step: f64,
    /// Subdivision factor applied near events.
    pub refine_factor: usize,
    /// Maximum number of nested subdivisions.
    pub max_refinements: usize,
    /// Two axis zeros closer than this are an approach.
    pub collision_radius: f64,
    /// Half-width of the local winding box at a suspected split.
    pub box_half_width: f64,
    /// An off-axis eigenvalue with Re λ below this is tested for a rejoin.
    pub rejoin_re: f64,
    /// Sample spacing of local axis scans.
    pub sample_spacing: f64,
}

impl Default for TrackSettings {
    fn default() -> Self {
        TrackSettings {
            step: 0.05,
            refine_factor: 10,
            max_refinements: 3,
            collision_radius: 0.05,
            box_half_width: 0.1,
            rejoin_re: 1e-3,
            sample_spacing: 0.01,
        }
    }
}

/// The default μ grid: μ0 + 1e-3, then multiples of `step` above μ0 up to `mu_max`.
pub fn default_grid(m: u32, mu_max: f64, step: f64) -> Vec<f64> {
    let mu0 = m as f64 + 1.0;
    let mut g = vec![mu0 + 1e-3];
    let mut k = 1;
    loop {
        let mu = mu0 + step * k as f64;
        if mu > mu_max + 1e-12 {
            break;
        }
        g.push(mu.min(mu_max));
        k += 1;
    }
    if *g.last().unwrap() < mu_max - 1e-12 {
        g.push(mu_max);
    }
    g
}

enum Outcome {
    Accepted,
    Refine(String),
}

struct Tracker<'a> {
    cache: &'a ProfileCache,
    settings: &'a TrackSettings,
    track: BranchTrack,
    /// Signature the tracked eigenvalue carries on the axis (before a split).
    axis_signature: Signature,
    /// Nearest other axis zero at the last on-axis step, with its signature.
    neighbour: Option<EigRecord>,
    /// Whether an approach event is currently open.
    approaching: bool,
    /// Distance to the nearest axis neighbour at the last on-axis step.
    last_gap: Option<f64>,
}

impl<'a> Tracker<'a> {
    fn last(&self) -> EigRecord {
        *self.track.records.last().unwrap()
    }

    fn predict(&self, mu: f64) -> C64 {
        let n = self.track.records.len();
        let b = self.track.records[n - 1];
        if n >= 2 {
            let a = self.track.records[n - 2];
            if a.on_axis() == b.on_axis() && b.mu > a.mu && b.mu - a.mu <= 2.0 * (mu - b.mu).max(1e-9) * 10.0 {
                return b.lambda + (b.lambda - a.lambda) * ((mu - b.mu) / (b.mu - a.mu));
            }
        }
        b.lambda
    }

    fn lost(&self, mu: f64, reason: String) -> KreinError {
        KreinError::TrackLost { mu, reason, last: Box::new(self.last()) }
    }

    fn advance(&mut self, mu: f64, level: usize) -> Result<(), KreinError> {
        let allow = level < self.settings.max_refinements;
        match self.attempt(mu, allow)? {
            Outcome::Accepted => Ok(()),
            Outcome::Refine(reason) => {
                if !allow {
                    return Err(self.lost(mu, reason));
                }
                let mu0 = self.last().mu;
                let n = self.settings.refine_factor;
                for k in 1..=n {
                    let m = if k == n { mu } else { mu0 + (mu - mu0) * k as f64 / n as f64 };
                    self.advance(m, level + 1)?;
                }
                Ok(())
            }
        }
    }

    fn attempt(&mut self, mu: f64, allow_refine: bool) -> Result<Outcome, KreinError> {
        let profile = self.cache.get(mu)?;
        let ctx = EvansContext::new(&profile, EvansOptions::default());
        let f = ctx.mode(self.track.j);
        if self.last().on_axis() {
            self.attempt_axis(&profile, &f, mu, allow_refine)
        } else {
            self.attempt_off(&profile, &f, mu, allow_refine)
        }
    }

    fn record(&mut self, mu: f64, lambda: C64, signature: Signature) -> Result<(), KreinError> {
        check_eigenvalue_bound(self.cache.m(), mu, lambda)?;
        let j = self.track.j;
        self.track.records.push(EigRecord { lambda, j, mu, multiplicity: 1, signature });
        Ok(())
    }

    fn event(&mut self, mu: f64, kind: EventKind, lambda: C64, partner: Option<EigRecord>) {
        let tracked_signature = self.axis_signature;
        self.track.events.push(TrackEvent { mu, kind, lambda, partner, tracked_signature });
    }

    fn attempt_axis(
        &mut self,
        profile: &VortexProfile,
        f: &dyn SpectralFunction,
        mu: f64,
        allow_refine: bool,
    ) -> Result<Outcome, KreinError> {
        let set = self.settings;
        let prev = self.last();
        let beta0 = prev.lambda.im;
        let pred = self.predict(mu).im;
        let w = (0.1f64).max(3.0 * (pred - beta0).abs());
        let n = ((2.0 * w / set.sample_spacing).ceil() as usize + 1).max(11);
        let scan = axis_zero_scan_with(f, pred - w, pred + w, n, 0.0)?;
        let j = self.track.j;

        if scan.zeros.is_empty() {
            return self.split_check(profile, f, mu, pred, allow_refine);
        }
        // Candidates by distance to the prediction; prefer the tracked signature.
        let mut cands: Vec<f64> = scan.zeros.iter().map(|z| z.im).collect();
        cands.sort_by(|a, b| (a - pred).abs().partial_cmp(&(b - pred).abs()).unwrap());
        let tol = (0.25 * w).max(5.0 * (pred - beta0).abs());
        let crossing = |b: f64| beta0.abs() >= ORIGIN_TOL && b.abs() >= ORIGIN_TOL && (b > 0.0) != (beta0 > 0.0);
        let expected = |b: f64| {
            if !self.axis_signature.is_definite() {
                None
            } else if crossing(b) {
                Some(self.axis_signature.flipped())
            } else {
                Some(self.axis_signature)
            }
        };
        let mut chosen: Option<(f64, Signature)> = None;
        for &b in cands.iter().take(2) {
            if (b - pred).abs() > tol {
                continue;
            }
            let (sig, _) = signature_at(profile, j, C64::new(0.0, b))?;
            match expected(b) {
                Some(e) if sig.is_definite() && sig != e => continue,
                _ => {
                    chosen = Some((b, sig));
                    break;
                }
            }
        }
        let Some((beta, sig)) = chosen else {
            if allow_refine {
                return Ok(Outcome::Refine(format!("no axis zero consistent with the branch near {pred}")));
            }
            // Finest level: the nearest zero, flagged through its signature.
            let b = cands[0];
            if (b - pred).abs() > tol {
                return self.split_check(profile, f, mu, pred, allow_refine);
            }
            let (sig, _) = signature_at(profile, j, C64::new(0.0, b))?;
            self.accept_axis(profile, mu, b, sig, &scan.zeros)?;
            return Ok(Outcome::Accepted);
        };
        // Approaches are resolved on the refined step.
        let near = scan.zeros.iter().any(|z| z.im != beta && (z.im - beta).abs() < set.collision_radius);
        let coarse = mu - prev.mu > set.step / set.refine_factor as f64 * 1.0001;
        if near && coarse && allow_refine {
            return Ok(Outcome::Refine("approach".into()));
        }
        self.accept_axis(profile, mu, beta, sig, &scan.zeros)?;
        Ok(Outcome::Accepted)
    }

    fn accept_axis(
        &mut self,
        profile: &VortexProfile,
        mu: f64,
        beta: f64,
        sig: Signature,
        zeros: &[crate::evans::AxisZero],
    ) -> Result<(), KreinError> {
        let prev = self.last();
        let beta0 = prev.lambda.im;
        let j = self.track.j;
        if beta0.abs() >= ORIGIN_TOL && beta.abs() >= ORIGIN_TOL && (beta > 0.0) != (beta0 > 0.0) {
            self.event(mu, EventKind::ZeroCrossing, C64::new(0.0, 0.0), None);
        }
        if sig.is_definite() {
            self.axis_signature = sig;
        } else if !self.axis_signature.is_definite() && sig != Signature::Indefinite {
            self.axis_signature = sig;
        }
        self.record(mu, C64::new(0.0, beta), sig)?;
        // Nearest neighbour on the axis.
        let nb = zeros
            .iter()
            .filter(|z| (z.im - beta).abs() > 1e-12)
            .min_by(|a, b| (a.im - beta).abs().partial_cmp(&(b.im - beta).abs()).unwrap());
        self.neighbour = None;
        if let Some(z) = nb {
            if (z.im - beta).abs() < 4.0 * self.settings.collision_radius {
                let (s, _) = signature_at(profile, j, C64::new(0.0, z.im))?;
                let rec = EigRecord { lambda: C64::new(0.0, z.im), j, mu, multiplicity: z.mult, signature: s };
                self.neighbour = Some(rec);
                let gap = (z.im - beta).abs();
                let inside = gap < self.settings.collision_radius;
                let closing = self.last_gap.is_some_and(|g| g > gap);
                self.last_gap = Some(gap);
                if inside && closing && !self.approaching {
                    self.approaching = true;
                    let kind = if s.is_definite() && s == self.axis_signature.flipped() {
                        EventKind::Collision
                    } else {
                        EventKind::AvoidedCrossing
                    };
                    self.event(mu, kind, C64::new(0.0, beta), Some(rec));
                } else if !inside {
                    self.approaching = false;
                }
            } else {
                self.approaching = false;
                self.last_gap = None;
            }
        } else {
            self.approaching = false;
            self.last_gap = None;
        }
        Ok(())
    }

    /// The tracked axis zero has disappeared near `pred`: count zeros in the
    /// local box to decide between a split and a lost branch.
    fn split_check(
        &mut self,
        _profile: &VortexProfile,
        f: &dyn SpectralFunction,
        mu: f64,
        pred: f64,
        allow_refine: bool,
    ) -> Result<Outcome, KreinError> {
        let b = self.settings.box_half_width;
        let half = local_half_box(b, pred - b, pred + b);
        let count = match winding_number(f, &half) {
            Ok(w) => w.winding,
            Err(e) => {
                if allow_refine {
                    return Ok(Outcome::Refine(format!("local winding failed: {e}")));
                }
                return Err(e.into());
            }
        };
        if count != 2 {
            return Ok(Outcome::Refine(format!("axis zero lost near {pred} (local count {count})")));
        }
        let zs = zeros_in_rectangle(f, 0.0, b, pred - b, pred + b)?;
        let Some(&lambda) = zs.iter().filter(|z| z.re > 0.0).min_by(|a, c| {
            (a.im - pred).abs().partial_cmp(&(c.im - pred).abs()).unwrap()
        }) else {
            return Ok(Outcome::Refine("split pair not located".into()));
        };
        if self.neighbour.is_none() && allow_refine {
            return Ok(Outcome::Refine("split without a resolved approach".into()));
        }
        if !self.approaching {
            if let Some(nb) = self.neighbour {
                let prev_mu = self.last().mu;
                let kind = if nb.signature == self.axis_signature.flipped() {
                    EventKind::Collision
                } else {
                    EventKind::AvoidedCrossing
                };
                self.event(prev_mu, kind, self.last().lambda, Some(nb));
            }
        }
        let partner = self.neighbour;
        self.event(mu, EventKind::Split, lambda, partner);
        self.approaching = false;
        self.record(mu, lambda, Signature::Zero)?;
        Ok(Outcome::Accepted)
    }

    fn attempt_off(
        &mut self,
        profile: &VortexProfile,
        f: &dyn SpectralFunction,
        mu: f64,
        allow_refine: bool,
    ) -> Result<Outcome, KreinError> {
        let set = self.settings;
        let prev = self.last();
        let pred = self.predict(mu);
        let motion = (pred - prev.lambda).norm();
        // A predicted real part near zero calls for small steps.
        if pred.re < 0.5 * prev.lambda.re && allow_refine && mu - prev.mu > set.step / set.refine_factor as f64 * 1.0001
        {
            return Ok(Outcome::Refine("approaching the axis".into()));
        }
        let start = C64::new(pred.re.max(0.25 * prev.lambda.re), pred.im);
        let z = polish_zero(f, start, (0.1 * motion).max(1e-4)).ok();
        let window = (0.02f64).max(3.0 * motion);
        if let Some(z) = z {
            if z.re > set.rejoin_re && (z - pred).norm() < window {
                self.record(mu, z, Signature::Zero)?;
                return Ok(Outcome::Accepted);
            }
        }
        // Rejoin test: two axis zeros near Im λ and no zero in the local box.
        let b = set.box_half_width;
        let y = pred.im;
        let scan = axis_zero_scan_with(f, y - b, y + b, ((2.0 * b / set.sample_spacing) as usize + 1).max(21), 0.0)?;
        if scan.zeros.len() >= 2 {
            let half = local_half_box(b, y - b, y + b);
            let count = winding_number(f, &half).map(|w| w.winding).unwrap_or(-1);
            let on_axis: i64 = scan.zeros.iter().map(|z| z.mult as i64).sum();
            if count >= 0 && unstable_count(count, &scan.zeros).is_ok_and(|n| n == 0) && on_axis >= 2 {
                let mut zs: Vec<f64> = scan.zeros.iter().map(|z| z.im).collect();
                zs.sort_by(|a, c| (a - y).abs().partial_cmp(&(c - y).abs()).unwrap());
                let (a, c) = (zs[0], zs[1]);
                let j = self.track.j;
                let (sa, _) = signature_at(profile, j, C64::new(0.0, a))?;
                let (sc, _) = signature_at(profile, j, C64::new(0.0, c))?;
                let want = self.axis_signature;
                let (mine, other, smine, sother) = if sa == want || (sc != want && sa.is_definite() && !sc.is_definite())
                {
                    (a, c, sa, sc)
                } else {
                    (c, a, sc, sa)
                };
                if smine != want && allow_refine {
                    return Ok(Outcome::Refine("rejoin signatures unresolved".into()));
                }
                let partner = EigRecord { lambda: C64::new(0.0, other), j, mu, multiplicity: 1, signature: sother };
                if smine.is_definite() {
                    self.axis_signature = smine;
                }
                self.event(mu, EventKind::Rejoin, C64::new(0.0, mine), Some(partner));
                self.record(mu, C64::new(0.0, mine), smine)?;
                self.neighbour = Some(partner);
                self.approaching = true;
                return Ok(Outcome::Accepted);
            }
        }
        if let Some(z) = z {
            if z.re > 0.0 && (z - pred).norm() < window && !allow_refine {
                self.record(mu, z, Signature::Zero)?;
                return Ok(Outcome::Accepted);
            }
        }
        Ok(Outcome::Refine(format!("off-axis eigenvalue lost near {pred}")))
    }
}

/// Right half of the box [−x, x] × [y0, y1] as a mirrored contour.
fn local_half_box(x: f64, y0: f64, y1: f64) -> ContourPath {
    let p = |a: f64, b: f64| C64::new(a, b);
    ContourPath {
        pieces: vec![
            Piece::Line { a: p(0.0, y0), b: p(x, y0) },
            Piece::Line { a: p(x, y0), b: p(x, y1) },
            Piece::Line { a: p(x, y1), b: p(0.0, y1) },
        ],
        mirrored: true,
    }
}

/// Follows the eigenvalue branch of mode j that starts at `seed` (a record at
/// μ = m + 1 from [`seed_table`]) along `grid`, which must start above m + 1.
///
/// Axis zeros are continued by secant prediction and a local scan; the zero
/// is chosen by proximity and signature. When it disappears, a local
/// winding count decides whether it split off the axis, and the off-axis
/// eigenvalue is continued by Muller iteration until it rejoins.
pub fn track_branch(
    cache: &ProfileCache,
    j: i32,
    seed: &EigRecord,
    grid: &[f64],
    settings: &TrackSettings,
) -> Result<BranchTrack, KreinError> {
    let mu0 = cache.m() as f64 + 1.0;
    let grid: Vec<f64> = grid.iter().copied().filter(|&m| m > mu0 + 1e-12).collect();
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KreinError::InvalidArgument("grid must be increasing and extend above m + 1".into()));
    }
    let first = grid[0];
    let profile = cache.get(first)?;
    let ctx = EvansContext::new(&profile, EvansOptions::default());
    let f = ctx.mode(j);

    let mut track = BranchTrack { j, seed: *seed, records: vec![*seed], events: Vec::new() };
    // Locate the seed's continuation on the first grid point.
    let reach = 0.05f64.max(2.0 * (first - mu0));
    let b0 = seed.lambda.im;
    let scan = axis_zero_scan_with(&f, b0 - reach, b0 + reach, 201, 0.0)?;
    let mut best: Option<(f64, Signature)> = None;
    let mut by_dist: Vec<f64> = scan.zeros.iter().map(|z| z.im).collect();
    by_dist.sort_by(|a, c| (a - b0).abs().partial_cmp(&(c - b0).abs()).unwrap());
    for &b in by_dist.iter().take(3) {
        let (s, _) = signature_at(&profile, j, C64::new(0.0, b))?;
        let ok = match seed.signature {
            Signature::Positive | Signature::Negative => s == seed.signature,
            _ => true,
        };
        if ok {
            best = Some((b, s));
            break;
        }
    }
    let twin = seed_table_window(cache.m(), j..=j, b0.abs() + 1.0)
        .into_iter()
        .find(|r| r.lambda.im == b0 && r.signature == seed.signature.flipped());
    let mut tracker = Tracker {
        cache,
        settings,
        track: BranchTrack { records: Vec::new(), ..track.clone() },
        axis_signature: seed.signature,
        neighbour: None,
        approaching: false,
        last_gap: None,
    };
    match best {
        Some((b, s)) => {
            track.records.push(EigRecord { lambda: C64::new(0.0, b), j, mu: first, multiplicity: 1, signature: s });
            if s.is_definite() {
                tracker.axis_signature = s;
            }
        }
        None => {
            // The seed pair has left the axis immediately (collision at μ0).
            let zs = zeros_in_rectangle(&f, 0.0, reach, b0 - reach, b0 + reach)?;
            let Some(&z) = zs.iter().filter(|z| z.re > 0.0).min_by(|a, c| {
                (a.im - b0).abs().partial_cmp(&(c.im - b0).abs()).unwrap()
            }) else {
                return Err(KreinError::TrackLost {
                    mu: first,
                    reason: "seed continuation not found".into(),
                    last: Box::new(*seed),
                });
            };
            track.events.push(TrackEvent {
                mu: mu0,
                kind: EventKind::Collision,
                lambda: seed.lambda,
                partner: twin,
                tracked_signature: seed.signature,
            });
            track.events.push(TrackEvent {
                mu: first,
                kind: EventKind::Split,
                lambda: z,
                partner: twin,
                tracked_signature: seed.signature,
            });
            track.records.push(EigRecord { lambda: z, j, mu: first, multiplicity: 1, signature: Signature::Zero });
        }
    }
    tracker.track = track;
    for &mu in &grid[1..] {
        tracker.advance(mu, 0)?;
    }
    Ok(tracker.track)
}

/// Tracks every seed (in parallel) on a shared profile cache.
pub fn track_all(
    cache: &ProfileCache,
    seeds: &[EigRecord],
    grid: &[f64],
    settings: &TrackSettings,
) -> Vec<Result<BranchTrack, KreinError>> {
    use rayon::prelude::*;
    seeds.par_iter().map(|s| track_branch(cache, s.j, s, grid, settings)).collect()
}

// ---------------------------------------------------------------------------
// Completeness certificate
// ---------------------------------------------------------------------------

/// Contour count of one mode at one μ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeCount {
    /// Half-height of the contour actually used.
    pub y: f64,
    pub winding: i64,
    /// Zeros on the imaginary axis inside the contour.
    pub axis: Vec<AxisZero>,
    /// Winding minus axis multiplicities: the number of off-axis zeros.
    pub n_su: i64,
}

/// n_su of E_j inside the standard contour [−3(μ−m), 3(μ−m)] × [−y, y]
/// with y ≥ `y_min`, raised in steps until no axis zero lies within 0.02 of
/// the horizontal edges and no zero lies on the contour.
pub fn count_unstable(
    f: &dyn SpectralFunction,
    mu: f64,
    m: u32,
    y_min: f64,
    axis_spacing: f64,
) -> Result<ModeCount, EvansError> {
    let mut y = y_min;
    let mut last = None;
    for _ in 0..40 {
        let n = (2.0 * y / axis_spacing).ceil() as usize + 1;
        let scan = axis_zero_scan_with(f, -y, y, n, 1e-3)?;
        if scan.zeros.iter().any(|z| (z.im.abs() - y).abs() < 0.02) {
            y += 0.13;
            continue;
        }
        match winding_number(f, &ContourPath::standard(mu, m, y)) {
            Ok(w) => {
                let n_su = unstable_count(w.winding, &scan.zeros)?;
                return Ok(ModeCount { y, winding: w.winding, axis: scan.zeros, n_su });
            }
            Err(e @ EvansError::ZeroOnContour { .. }) => {
                last = Some(e);
                y += 0.13;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(EvansError::RefinementFailed(format!("no clean contour height above {y_min}"))))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateSettings {
    /// Spacing of the μ samples at which the contour count is taken.
    pub contour_spacing: f64,
    /// Spacing of the μ samples for the sign of E_j(0).
    pub origin_spacing: f64,
    /// Minimum half-height of the contour.
    pub y_min: f64,
    /// Axis scan sample spacing for the contour counts.
    pub axis_spacing: f64,
}

impl Default for CertificateSettings {
    fn default() -> Self {
        CertificateSettings { contour_spacing: 1.0, origin_spacing: 0.05, y_min: 6.0, axis_spacing: 0.02 }
    }
}

/// Count of unstable eigenvalues of one mode at one μ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountSample {
    pub mu: f64,
    pub j: i32,
    pub y: f64,
    pub n_su: i64,
    /// 2 × number of tracks of this mode that are off the axis at μ.
    pub attributed: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub m: u32,
    pub mu_range: (f64, f64),
    pub pass: bool,
    pub exceptions: Vec<String>,
    pub counts: Vec<CountSample>,
    pub splits: usize,
    pub zero_crossings: usize,
}

/// Certifies that no unstable eigenvalue escapes the tracks:
/// every negative seed with 0 < j < 2m is tracked; every split and rejoin
/// pairs opposite signatures; signatures change only at logged events; every
/// sign change of E_j(0) in μ is a logged zero crossing; and at sampled μ the
/// contour count n_su equals twice the number of off-axis tracks.
pub fn completeness_certificate(
    cache: &ProfileCache,
    mu_range: (f64, f64),
    tracks: &[BranchTrack],
    settings: &CertificateSettings,
) -> Result<CertificateReport, KreinError> {
    let m = cache.m();
    let mut exceptions = Vec::new();
    for s in negative_seeds(m) {
        let covered = tracks.iter().any(|t| t.j == s.j && t.seed.signature == Signature::Negative && t.seed.lambda == s.lambda);
        if !covered {
            exceptions.push(format!("negative seed j={} lambda={}i is not tracked", s.j, s.lambda.im));
        }
    }
    for t in tracks {
        for e in t.parity_violations() {
            exceptions.push(format!("j={}: {} at mu={:.4} without opposite-signature partner", t.j, e.kind.as_str(), e.mu));
        }
        for r in t.signature_violations() {
            exceptions.push(format!("j={}: signature change without event at mu={:.4}", t.j, r.mu));
        }
        if let Some(last) = t.records.last() {
            if last.mu < mu_range.1 - 1e-9 {
                exceptions.push(format!("j={}: track ends at mu={:.4}", t.j, last.mu));
            }
        }
    }
    let js: Vec<i32> = (1..2 * m as i32).collect();

    // Zero crossings: sign changes of the real function E_j(0).
    let mut crossings = 0;
    // E_j(0) vanishes at μ = m + 1 for j = m, so the sign grid starts just above it.
    let lo = if (mu_range.0 - (m as f64 + 1.0)).abs() < 1e-9 { mu_range.0 + 1e-3 } else { mu_range.0 };
    let n_o = ((mu_range.1 - lo) / settings.origin_spacing).ceil().max(1.0) as usize;
    let mus: Vec<f64> = (0..=n_o).map(|k| lo + (mu_range.1 - lo) * k as f64 / n_o as f64).collect();
    let mut signs: HashMap<i32, Vec<f64>> = HashMap::new();
    for &mu in &mus {
        let p = cache.get(mu)?;
        let ctx = EvansContext::new(&p, EvansOptions::default());
        for &j in &js {
            signs.entry(j).or_default().push(ctx.eval(j, C64::new(0.0, 0.0))?.mantissa.re);
        }
    }
    for &j in &js {
        let v = &signs[&j];
        for k in 0..v.len() - 1 {
            let changed = (v[k] > 0.0) != (v[k + 1] > 0.0);
            let logged: usize = tracks.iter().filter(|t| t.j == j).map(|t| t.crossings_in(mus[k], mus[k + 1])).sum();
            if changed {
                crossings += 1;
            }
            if changed != (logged % 2 == 1) {
                exceptions.push(format!(
                    "j={j}: E_j(0) sign change {changed} but {logged} logged crossings in ({:.3}, {:.3}]",
                    mus[k],
                    mus[k + 1]
                ));
            }
        }
    }

    // Contour counts at sampled μ, shifted away from logged events.
    let events: Vec<f64> = tracks
        .iter()
        .flat_map(|t| t.events.iter().filter(|e| matches!(e.kind, EventKind::Split | EventKind::Rejoin)).map(|e| e.mu))
        .collect();
    let n_c = ((mu_range.1 - mu_range.0) / settings.contour_spacing).ceil().max(1.0) as usize;
    let mut counts = Vec::new();
    for k in 0..=n_c {
        let mut mu = (mu_range.0 + settings.contour_spacing * k as f64).min(mu_range.1);
        if k == 0 {
            mu = (mu_range.0 + 0.5 * settings.contour_spacing).min(mu_range.1);
        }
        for _ in 0..10 {
            match events.iter().find(|&&e| (e - mu).abs() < 0.05) {
                Some(&e) => mu = if e > mu_range.0 + 0.1 { e - 0.06 } else { e + 0.06 },
                None => break,
            }
        }
        let p = cache.get(mu)?;
        let ctx = EvansContext::new(&p, EvansOptions::default());
        for &j in &js {
            let reach = tracks
                .iter()
                .filter(|t| t.j == j)
                .flat_map(|t| t.records.iter().filter(|r| (r.mu - mu).abs() < 1.0).map(|r| r.lambda.im.abs()))
                .fold(settings.y_min, f64::max);
            let f = ctx.mode(j);
            let count = count_unstable(&f, mu, m, reach.ceil() + 0.5, settings.axis_spacing);
            let attributed = 2 * tracks.iter().filter(|t| t.j == j && t.off_axis_at(mu)).count() as i64;
            match count {
                Ok(c) => {
                    let n_su = c.n_su;
                    if n_su != attributed {
                        exceptions.push(format!("mu={mu:.3} j={j}: n_su={n_su} but {attributed} attributed to tracks"));
                    }
                    counts.push(CountSample { mu, j, y: c.y, n_su, attributed });
                }
                Err(e) => exceptions.push(format!("mu={mu:.3} j={j}: contour count failed: {e}")),
            }
        }
    }
    let splits = tracks.iter().flat_map(|t| t.events.iter()).filter(|e| e.kind == EventKind::Split).count();
    Ok(CertificateReport { m, mu_range, pass: exceptions.is_empty(), exceptions, counts, splits, zero_crossings: crossings })
}

// ---------------------------------------------------------------------------
// Asymptotic fits
// ---------------------------------------------------------------------------

/// Fit of −iλ(μ) = b − c·μ^{−p} on a track tail.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailFit {
    pub b: f64,
    pub c: f64,
    pub p: f64,
    /// RMS residual of the fit.
    pub residual: f64,
    /// The local exponent drifts across the window (non-algebraic decay).
    pub anomalous: bool,
    /// The data are constant (a symmetry eigenvalue).
    pub constant: bool,
    pub mu_min: f64,
    pub mu_max: f64,
    pub n_points: usize,
}

/// Linear least squares of β ≈ b − c·μ^{−p} for fixed p; returns (b, c, rms).
fn fit_fixed_p(data: &[(f64, f64)], p: f64) -> (f64, f64, f64) {
    let n = data.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(mu, beta) in data {
        let x = mu.powf(-p);
        sx += x;
        sy += beta;
        sxx += x * x;
        sxy += x * beta;
    }
    let det = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / det;
    let b = (sy - slope * sx) / n;
    let c = -slope;
    let rms = (data.iter().map(|&(mu, beta)| (beta - b + c * mu.powf(-p)).powi(2)).sum::<f64>() / n).sqrt();
    (b, c, rms)
}

/// Lower end of the default fit window.
pub const DEFAULT_FIT_MU_MIN: f64 = 15.0;

/// Fits the on-axis part of a track with μ ≥ `mu_min` by variable projection:
/// b and c by linear least squares, p by golden-section search on the
/// residual. The exponent is also fitted separately on the two halves of the
/// window; a difference above 0.3 flags an anomalous rate.
pub fn fit_tail(track: &BranchTrack, mu_min: f64) -> Result<TailFit, KreinError> {
    let data: Vec<(f64, f64)> =
        track.records.iter().filter(|r| r.on_axis() && r.mu >= mu_min).map(|r| (r.mu, r.lambda.im)).collect();
    if data.len() < 6 {
        return Err(KreinError::InvalidArgument(format!("only {} on-axis points above mu = {mu_min}", data.len())));
    }
    let mu_max = data.last().unwrap().0;
    let mean = data.iter().map(|d| d.1).sum::<f64>() / data.len() as f64;
    let spread = data.iter().map(|d| (d.1 - mean).abs()).fold(0.0, f64::max);
    if spread < 1e-8 * (1.0 + mean.abs()) {
        return Ok(TailFit {
            b: mean,
            c: 0.0,
            p: 0.0,
            residual: spread,
            anomalous: false,
            constant: true,
            mu_min,
            mu_max,
            n_points: data.len(),
        });
    }
    let best_p = |d: &[(f64, f64)]| -> f64 {
        // Coarse scan, then golden section around the best grid point.
        let grid: Vec<f64> = (1..=120).map(|k| 0.05 * k as f64).collect();
        let k = (0..grid.len())
            .min_by(|&a, &b| fit_fixed_p(d, grid[a]).2.partial_cmp(&fit_fixed_p(d, grid[b]).2).unwrap())
            .unwrap();
        let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d2 = a + g * (b - a);
            if fit_fixed_p(d, c).2 < fit_fixed_p(d, d2).2 {
                b = d2;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    };
    let p = best_p(&data);
    let (b, c, residual) = fit_fixed_p(&data, p);
    let half = data.len() / 2;
    let anomalous = if half >= 6 {
        (best_p(&data[..half]) - best_p(&data[half..])).abs() > 0.3
    } else {
        false
    };
    Ok(TailFit { b, c, p, residual, anomalous, constant: false, mu_min, mu_max, n_points: data.len() })
}

/// One row of the diagram CSV.
pub fn csv_header() -> &'static str {
    "mu,j,re_lambda,im_lambda,signature,event"
}

/// Long-format diagram rows for a set of tracks, in track then μ order.
/// Events are attached to the record at the same μ.
pub fn diagram_rows(tracks: &[BranchTrack]) -> Vec<String> {
    let mut rows = Vec::new();
    for t in tracks {
        for r in &t.records {
            let ev: Vec<&str> = t
                .events
                .iter()
                .filter(|e| (e.mu - r.mu).abs() < 1e-12 && e.kind != EventKind::Collision && e.kind != EventKind::AvoidedCrossing)
                .map(|e| e.kind.as_str())
                .chain(
                    t.events
                        .iter()
                        .filter(|e| {
                            (e.mu - r.mu).abs() < 1e-12 && matches!(e.kind, EventKind::Collision | EventKind::AvoidedCrossing)
                        })
                        .map(|e| e.kind.as_str()),
                )
                .collect();
            rows.push(format!(
                "{},{},{:.12e},{:.12e},{},{}",
                r.mu,
                r.j,
                r.lambda.re,
                r.lambda.im,
                r.signature.as_str(),
                ev.join(";")
            ));
        }
    }
    rows
}
