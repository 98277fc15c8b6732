//! The verification suites. Each suite expands into independent jobs that
//! run on a thread pool; every job returns finished records.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rand_chacha::rand_core::RngCore;
use rayon::prelude::*;
use weil_core::cocycle::CocycleData;
use weil_core::descent::{build_splitting, default_theta_candidates};
use weil_core::numtheory::teichmuller;
use weil_core::rational::{fmt_q, frac, q, Q};
use weil_core::rep::{schrodinger_apply, WeilOperator};
use weil_core::sympl::parse_word;
use weil_core::twists::square_twist_group;
use weil_core::{
    AdditiveCharacter, Error, EvalOptions, GaloisElement, HeisenbergElement, LocalScalar,
    SchwartzFunction, SplittingData, Subfield, SymplecticElement, Tower, TwistIdentity, TwistReport, WeilMode,
};

use crate::config::{ConfigError, RunConfig, Suite};
use crate::format::cyclotomic_text;
use crate::probes::{
    generators, heisenberg_generators, heisenberg_label, probes, random_heisenberg, random_word, rng, stream,
    Coefficients,
};
use crate::report::{Record, Report};

/// How far past `N` a fixed check may deepen the tower before giving up.
const EXTRA_DEPTH: u32 = 2;
/// Attempts per random slot before the slot is reported as failed.
const RESAMPLE_ATTEMPTS: u64 = 8;

type Job<'a> = Box<dyn Fn() -> Vec<Record> + Send + Sync + 'a>;

/// Runs every selected suite on a pool of `jobs` threads (0: one per core).
pub fn run(cfg: &RunConfig, jobs: usize) -> Result<Report, ConfigError> {
    cfg.validate()?;
    let h = Harness::new(cfg.clone());
    let items: Vec<Job> = cfg.suites.iter().flat_map(|s| h.jobs(*s)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ConfigError(format!("thread pool: {e}")))?;
    let records: Vec<Record> = pool.install(|| items.par_iter().flat_map_iter(|job| job()).collect());
    let records = records.into_iter().filter(|r| cfg.wants(&r.name)).collect();
    Ok(Report::new(cfg.clone(), records))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_millis() as u64)
}

/// The depth a failed evaluation asks for, if any.
fn needed_depth(e: &Error) -> Option<u32> {
    match e {
        Error::TowerTooShallow { needed, .. } => Some(*needed),
        Error::CellTooWide { width, .. } => Some(*width as u32),
        _ => None,
    }
}

/// Errors that say the input is too large for the configured resources,
/// rather than that an identity failed.
fn is_resource_error(e: &Error) -> bool {
    needed_depth(e).is_some()
        || matches!(e, Error::CellOverflow { .. } | Error::PrecisionOverflow { .. })
}

/// Evaluates `f` at depth `base`, moving to the depth an error asks for as
/// long as it stays within `cap`.
fn deepening<T>(base: u32, cap: u32, mut f: impl FnMut(u32) -> weil_core::Result<T>) -> (u32, weil_core::Result<T>) {
    let mut d = base;
    loop {
        match f(d) {
            Err(e) => match needed_depth(&e) {
                Some(need) if need > d && need <= cap => d = need,
                _ => return (d, Err(e)),
            },
            ok => return (d, ok),
        }
    }
}

fn lift_all(fs: &[SchwartzFunction], depth: u32) -> Vec<SchwartzFunction> {
    fs.iter().map(|f| if f.tower().depth() < depth { f.lift(depth) } else { f.clone() }).collect()
}

fn lift_sigma(sigma: &GaloisElement, depth: u32) -> GaloisElement {
    if sigma.tower().depth() < depth {
        sigma.lift(depth)
    } else {
        *sigma
    }
}

fn cell_label((j, k): (i64, i64)) -> String {
    format!("{j},{k}")
}

struct Harness {
    cfg: RunConfig,
    lambda: AdditiveCharacter,
    opts: EvalOptions,
    cocycles: Vec<OnceLock<Result<Arc<CocycleData>, Error>>>,
    splittings: Vec<OnceLock<Result<Arc<SplittingData>, Error>>>,
}

impl Harness {
    fn new(cfg: RunConfig) -> Self {
        let slots = (cfg.depth + EXTRA_DEPTH + 1) as usize;
        Harness {
            lambda: AdditiveCharacter::standard(cfg.p),
            opts: EvalOptions::default(),
            cocycles: (0..slots).map(|_| OnceLock::new()).collect(),
            splittings: (0..slots).map(|_| OnceLock::new()).collect(),
            cfg,
        }
    }

    fn wants_any(&self, names: &[&str]) -> bool {
        names.iter().any(|n| self.cfg.wants(n))
    }

    fn base(&self) -> u32 {
        self.cfg.depth
    }

    fn cap(&self) -> u32 {
        self.cfg.depth + EXTRA_DEPTH
    }

    fn tower(&self, depth: u32) -> Tower {
        Tower::new(self.cfg.p, depth).expect("validated prime")
    }

    fn cocycle(&self, depth: u32) -> weil_core::Result<Arc<CocycleData>> {
        self.cocycles[depth as usize]
            .get_or_init(|| CocycleData::new(&self.lambda, self.cfg.n, self.tower(depth)).map(Arc::new))
            .clone()
    }

    fn splitting(&self, depth: u32) -> weil_core::Result<Arc<SplittingData>> {
        self.splittings[depth as usize]
            .get_or_init(|| {
                let c = self.cocycle(depth)?;
                build_splitting(&c, &default_theta_candidates(self.tower(depth))).map(Arc::new)
            })
            .clone()
    }

    /// Atoms of `cell` plus the configured number of random combinations,
    /// at depth `N`.
    fn probe_set(&self, tag: &str, cell: (i64, i64), field: Coefficients) -> weil_core::Result<Vec<SchwartzFunction>> {
        let mut r = rng(self.cfg.seed, stream(tag, &[cell.0, cell.1]));
        probes(self.tower(self.base()), self.cfg.n, cell, self.cfg.random_probes, &mut r, field)
    }

    fn word(&self, w: &str) -> SymplecticElement {
        parse_word(self.cfg.n, w).expect("generated words parse")
    }

    /// Runs an identity check with automatic deepening and turns the outcome
    /// into a record.
    fn check(
        &self,
        suite: Suite,
        name: &str,
        params: Vec<(&str, String)>,
        cap: u32,
        f: impl FnMut(u32) -> weil_core::Result<TwistReport>,
    ) -> Record {
        let ((depth, res), ms) = timed(|| deepening(self.base(), cap, f));
        let mut params = params;
        params.push(("depth", depth.to_string()));
        match res {
            Ok(r) => Record::from_twist(suite, r, &params, ms),
            Err(e) => Record::error(suite, name, &params, &e.to_string(), ms),
        }
    }

    fn jobs(&self, suite: Suite) -> Vec<Job<'_>> {
        match suite {
            Suite::StoneVonNeumann => self.stone_von_neumann(),
            Suite::Measures => self.measures(),
            Suite::Twists => self.twists(),
            Suite::Cocycle => self.cocycle_suite(),
            Suite::Descent => self.descent(),
            Suite::MainTheorem => self.main_theorem(),
        }
    }

    // ---- Schrödinger model and Weil operators

    fn stone_von_neumann(&self) -> Vec<Job<'_>> {
        let suite = Suite::StoneVonNeumann;
        let (p, n) = (self.cfg.p, self.cfg.n);
        let mut jobs: Vec<Job> = Vec::new();
        for &cell in &self.cfg.cells {
            for slot in 0..self.cfg.pairs as i64 {
                if !self.cfg.wants("heisenberg-law") {
                    break;
                }
                jobs.push(Box::new(move || {
                    let mut r = rng(self.cfg.seed, stream("heisenberg-pair", &[slot]));
                    let (a, b) = (random_heisenberg(&mut r, p, n), random_heisenberg(&mut r, p, n));
                    let params = vec![("h", heisenberg_label(&a)), ("h2", heisenberg_label(&b)), ("cell", cell_label(cell))];
                    vec![self.check(suite, "heisenberg-law", params.clone(), self.cap(), |d| {
                        let probes = lift_all(&self.probe_set("svn", cell, Coefficients::Cyclotomic)?, d);
                        let lim = self.opts.cell_limit;
                        let ab = a.mul(&b);
                        TwistReport::compare("heisenberg-law", vec![], &probes, |phi| {
                            let lhs = schrodinger_apply(&self.lambda, &a, &schrodinger_apply(&self.lambda, &b, phi, lim)?, lim)?;
                            Ok((lhs, schrodinger_apply(&self.lambda, &ab, phi, lim)?))
                        })
                    })]
                }));
            }
            if !self.cfg.wants("central-character") {
                continue;
            }
            jobs.push(Box::new(move || {
                let t_values = [q(1), frac(1, p as i64), frac(2, (p * p) as i64), frac(-1, p as i64), q(0)];
                t_values
                    .iter()
                    .map(|t| {
                        let params = vec![("t", fmt_q(t)), ("cell", cell_label(cell))];
                        self.check(suite, "central-character", params, self.cap(), |d| {
                            let probes = lift_all(&self.probe_set("svn", cell, Coefficients::Cyclotomic)?, d);
                            let h = HeisenbergElement::central(n, t.clone());
                            let value = self.lambda.eval(t, self.tower(d))?;
                            TwistReport::compare("central-character", vec![], &probes, |phi| {
                                Ok((schrodinger_apply(&self.lambda, &h, phi, self.opts.cell_limit)?, phi.scale(&value)))
                            })
                        })
                    })
                    .collect()
            }));
        }

        // direct against composed evaluation on random (g, atom) pairs
        let pairs = match (self.cfg.wants("mode-agreement"), n) {
            (false, _) => 0,
            (true, 1) => self.cfg.pairs,
            (true, _) => self.cfg.pairs.div_ceil(5),
        };
        for slot in 0..pairs as i64 {
            jobs.push(Box::new(move || {
                let cell = self.cfg.cells[slot as usize % self.cfg.cells.len()];
                vec![self.random_slot(suite, "mode-agreement", slot, |r| {
                    let w = random_word(r, p, n);
                    let atoms = self.probe_set("modes", cell, Coefficients::Cyclotomic).ok()?;
                    let atom = atoms[(r.next_u64() % atoms.len() as u64) as usize].clone();
                    let label = crate::format::function_spec(&atom);
                    let g = self.word(&w);
                    Some((vec![("g", w), ("probe", label)], move |d: u32| {
                        let op = WeilOperator::new(self.lambda.clone(), g.clone(), self.tower(d))?;
                        let phi = lift_all(std::slice::from_ref(&atom), d);
                        TwistReport::compare("mode-agreement", vec![], &phi, |phi| {
                            let direct = op.apply(phi, &self.opts.with_mode(WeilMode::Direct))?;
                            let composed = op.apply(phi, &self.opts.with_mode(WeilMode::Composed))?;
                            Ok((direct, composed))
                        })
                    }))
                })]
            }));
        }

        // intertwining for the generators and random words
        if !self.cfg.wants("intertwining") {
            return jobs;
        }
        let hs = heisenberg_generators(p, n);
        for &cell in &self.cfg.cells {
            for w in generators(p, n) {
                for h in hs.clone() {
                    let w = w.clone();
                    jobs.push(Box::new(move || {
                        let g = self.word(&w);
                        let params = vec![("g", w.clone()), ("h", heisenberg_label(&h)), ("cell", cell_label(cell))];
                        vec![self.check(suite, "intertwining", params, self.cap(), |d| self.intertwining(&g, &h, cell, d))]
                    }));
                }
            }
            for slot in 0..self.cfg.words as i64 {
                jobs.push(Box::new(move || {
                    heisenberg_generators(p, n)
                        .into_iter()
                        .enumerate()
                        .map(|(hi, h)| {
                            let slot_id = slot * 64 + hi as i64 + 1_000_000 * (cell.0 + 10) + 10_000 * cell.1;
                            self.random_slot(suite, "intertwining", slot_id, |r| {
                                let w = random_word(r, p, n);
                                let g = self.word(&w);
                                let h = h.clone();
                                let params = vec![("g", w), ("h", heisenberg_label(&h)), ("cell", cell_label(cell))];
                                Some((params, move |d: u32| self.intertwining(&g, &h, cell, d)))
                            })
                        })
                        .collect()
                }));
            }
        }
        jobs
    }

    fn intertwining(&self, g: &SymplecticElement, h: &HeisenbergElement, cell: (i64, i64), d: u32) -> weil_core::Result<TwistReport> {
        let probes = lift_all(&self.probe_set("intertwining", cell, Coefficients::Cyclotomic)?, d);
        let w = WeilOperator::new(self.lambda.clone(), g.clone(), self.tower(d))?;
        let w_inv = w.formal_inverse(&self.opts)?;
        let hg = h.act(g);
        let lim = self.opts.cell_limit;
        TwistReport::compare("intertwining", vec![], &probes, |phi| {
            let lhs = w_inv.apply(&schrodinger_apply(&self.lambda, h, &w.apply(phi, &self.opts)?, lim)?, &self.opts)?;
            Ok((lhs, schrodinger_apply(&self.lambda, &hg, phi, lim)?))
        })
    }

    /// A random check: draws parameters from a per-slot stream and redraws
    /// (up to a fixed number of times) when they need more than the
    /// configured resources.
    fn random_slot<F, G>(&self, suite: Suite, name: &str, slot: i64, mut draw: F) -> Record
    where
        F: FnMut(&mut rand_chacha::ChaCha8Rng) -> Option<(Vec<(&'static str, String)>, G)>,
        G: FnMut(u32) -> weil_core::Result<TwistReport>,
    {
        let mut last = None;
        for attempt in 0..RESAMPLE_ATTEMPTS {
            let mut r = rng(self.cfg.seed, stream(name, &[slot, attempt as i64]));
            let Some((params, f)) = draw(&mut r) else { continue };
            let ((depth, res), ms) = timed(|| deepening(self.base(), self.cap(), f));
            let mut params = params;
            params.push(("depth", depth.to_string()));
            params.push(("draw", attempt.to_string()));
            match res {
                Err(e) if is_resource_error(&e) => last = Some(e.to_string()),
                Ok(rep) => return Record::from_twist(suite, rep, &params, ms),
                Err(e) => return Record::error(suite, name, &params, &e.to_string(), ms),
            }
        }
        let msg = format!("no feasible draw in {RESAMPLE_ATTEMPTS} attempts; last: {}", last.unwrap_or_default());
        Record::error(suite, name, &[("slot", slot.to_string())], &msg, 0)
    }

    // ---- measures

    fn measures(&self) -> Vec<Job<'_>> {
        let suite = Suite::Measures;
        let p = self.cfg.p;
        let mut jobs: Vec<Job> = Vec::new();
        let haar = self.wants_any(&["haar-normalization", "haar-additivity", "haar-twist"]);
        jobs.push(Box::new(move || {
            if !haar {
                return Vec::new();
            }
            let tower = self.tower(self.base());
            let sqrt_p = tower.sqrt_table().sqrt_p;
            let mut out = Vec::new();
            for level in -2i64..=2 {
                let lam = AdditiveCharacter::twisted(p, pow_q(p, -level)).expect("non-zero twist");
                let params = |extra: Vec<(&'static str, String)>| {
                    let mut v = vec![("level", level.to_string())];
                    v.extend(extra);
                    v
                };
                // ∫_O = q^{l/2}, with the square root taken from the table
                let expected = sqrt_p.pow(level).expect("√p is invertible");
                let got = lam.lattice_measure(0, tower);
                out.push(scalar_record(suite, "haar-normalization", params(vec![]), got, expected));
                for k in -2i64..=2 {
                    let whole = lam.lattice_measure(k, tower);
                    let parts = lam.lattice_measure(k + 1, tower).scale(&q(p as i64));
                    out.push(scalar_record(suite, "haar-additivity", params(vec![("k", k.to_string())]), whole, parts));
                }
                for s in twist_values(p, self.base()) {
                    let twisted = lam.twist(&s).expect("non-zero").lattice_measure(0, tower);
                    let factor = LocalScalar::new(p, s.clone()).abs_sqrt(tower).expect("non-zero");
                    let rhs = &factor * &lam.lattice_measure(0, tower);
                    out.push(scalar_record(suite, "haar-twist", params(vec![("s", fmt_q(&s))]), twisted, rhs));
                }
            }
            out
        }));
        for level in -2i64..=2 {
            for &cell in &self.cfg.cells {
                if !self.cfg.wants("fourier-inversion") {
                    break;
                }
                jobs.push(Box::new(move || {
                    let lam = AdditiveCharacter::twisted(p, pow_q(p, -level)).expect("non-zero twist");
                    let params = vec![("level", level.to_string()), ("cell", cell_label(cell))];
                    vec![self.check(suite, "fourier-inversion", params, self.cap(), |d| {
                        // the self-dual measure makes the Fourier transform square to x ↦ -x
                        let n = self.cfg.n;
                        let f = WeilOperator::new(lam.clone(), SymplecticElement::tau(n, n), self.tower(d))?;
                        let reflect = WeilOperator::new(lam.clone(), SymplecticElement::iota(n), self.tower(d))?;
                        let probes = lift_all(&self.probe_set("fourier", cell, Coefficients::Cyclotomic)?, d);
                        TwistReport::compare("fourier-inversion", vec![], &probes, |phi| {
                            Ok((f.apply(&f.apply(phi, &self.opts)?, &self.opts)?, reflect.apply(phi, &self.opts)?))
                        })
                    })]
                }));
            }
        }
        jobs.extend(self.measure_identities(suite));
        jobs
    }

    fn measure_identities(&self, suite: Suite) -> Vec<Job<'_>> {
        let (p, n) = (self.cfg.p, self.cfg.n);
        let mut jobs: Vec<Job> = Vec::new();
        if !self.wants_any(&["character-measure", "similitude-measure", "measure-rationality"]) {
            return jobs;
        }
        for w in measure_elements(p, n) {
            jobs.push(Box::new(move || {
                let g = self.word(&w);
                let mut ids = vec![TwistIdentity::MeasureRationality { g: g.clone() }];
                for s in twist_values(p, self.base()) {
                    ids.push(TwistIdentity::CharacterMeasure { g: g.clone(), s: s.clone() });
                    ids.push(TwistIdentity::SimilitudeMeasure { g: g.clone(), s });
                }
                ids.iter()
                    .map(|id| {
                        self.check(suite, id.name(), vec![("word", w.clone())], self.cap(), |d| {
                            id.check(&self.lambda, &[], self.tower(d), &self.opts)
                        })
                    })
                    .collect()
            }));
        }
        jobs
    }

    // ---- twists

    fn twists(&self) -> Vec<Job<'_>> {
        let suite = Suite::Twists;
        let (p, n) = (self.cfg.p, self.cfg.n);
        let tower = self.tower(self.base());
        let real = Subfield::RealQuadratic.fixing_group(tower);
        let squares = square_twist_group(tower);
        let mut jobs: Vec<Job> = Vec::new();
        for &cell in &self.cfg.cells {
            for w in generators(p, n) {
                let (real, squares) = (real.clone(), squares.clone());
                jobs.push(Box::new(move || {
                    let g = self.word(&w);
                    let mut ids = Vec::new();
                    for s in twist_values(p, self.base()) {
                        ids.push(TwistIdentity::SimilitudeTwist { g: g.clone(), s });
                    }
                    for sigma in &real {
                        ids.push(TwistIdentity::GaloisTwist { g: g.clone(), sigma: *sigma });
                        ids.push(TwistIdentity::GaloisEquivariance { g: g.clone(), sigma: *sigma });
                    }
                    for sigma in &squares {
                        ids.push(TwistIdentity::GaloisConjugation { g: g.clone(), sigma: *sigma });
                    }
                    self.run_identities(suite, &ids, &w, cell)
                }));
            }
            let squares = squares.clone();
            jobs.push(Box::new(move || {
                let mut r = rng(self.cfg.seed, stream("dilation-units", &[]));
                let mut ts = vec![q(p as i64), q(teichmuller(p, self.base()) as i64), frac(1, p as i64)];
                while ts.len() < 6 {
                    let u = 1 + r.next_u64() % 97;
                    if !u.is_multiple_of(p) && !ts.contains(&q(u as i64)) {
                        ts.push(q(u as i64));
                    }
                }
                let ids: Vec<TwistIdentity> = squares
                    .iter()
                    .flat_map(|sigma| ts.iter().map(|t| TwistIdentity::DilationFixed { t: t.clone(), sigma: *sigma }))
                    .collect();
                self.run_identities(suite, &ids, "g(t)", cell)
            }));
        }
        jobs.extend(self.measure_identities(suite));
        jobs
    }

    fn run_identities(&self, suite: Suite, ids: &[TwistIdentity], word: &str, cell: (i64, i64)) -> Vec<Record> {
        ids.iter()
            .filter(|id| self.cfg.wants(id.name()))
            .map(|id| {
                let params = vec![("word", word.to_string()), ("cell", cell_label(cell))];
                self.check(suite, id.name(), params, self.cap(), |d| {
                    let probes = lift_all(&self.probe_set("twists", cell, Coefficients::Cyclotomic)?, d);
                    id.check(&self.lambda, &probes, self.tower(d), &self.opts)
                })
            })
            .collect()
    }

    // ---- cocycle

    fn cocycle_suite(&self) -> Vec<Job<'_>> {
        let suite = Suite::Cocycle;
        let (p, n) = (self.cfg.p, self.cfg.n);
        let transversal = match self.cocycle(self.base()) {
            Ok(c) => c.transversal(),
            Err(e) => return vec![Box::new(move || vec![Record::error(suite, "cocycle-data", &[], &e.to_string(), 0)])],
        };
        let mut jobs: Vec<Job> = Vec::new();
        for &cell in &self.cfg.cells {
            let pairs = self.wants_any(&["dilation-defect", "parity-defect", "cocycle-law"]);
            for sigma in transversal.iter().filter(|_| pairs) {
                for tau in &transversal {
                    let (sigma, tau) = (*sigma, *tau);
                    jobs.push(Box::new(move || {
                        let ((depth, res), ms) = timed(|| {
                            deepening(self.base(), self.cap(), |d| {
                                let c = self.cocycle(d)?;
                                let probes = lift_all(&self.probe_set("cocycle", cell, Coefficients::Cyclotomic)?, d);
                                c.cocycle_check(&lift_sigma(&sigma, d), &lift_sigma(&tau, d), &[], &probes, &self.opts)
                            })
                        });
                        let params = vec![("cell", cell_label(cell)), ("depth", depth.to_string())];
                        match res {
                            Ok(reports) => {
                                let each = ms / reports.len().max(1) as u64;
                                reports.into_iter().map(|r| Record::from_twist(suite, r, &params, each)).collect()
                            }
                            Err(e) => {
                                let mut params = params;
                                params.push(("sigma", sigma.exponent().to_string()));
                                params.push(("tau", tau.exponent().to_string()));
                                vec![Record::error(suite, "cocycle-law", &params, &e.to_string(), ms)]
                            }
                        }
                    }));
                }
            }
            let words = [format!("tau{n}"), "levi(2)".to_string(), format!("unip(1/{p})"), format!("g({p})")];
            for sigma in transversal.iter().filter(|_| self.cfg.wants("cocycle-conjugation")) {
                for w in &words {
                    let (sigma, w) = (*sigma, w.clone());
                    jobs.push(Box::new(move || {
                        let g = self.word(&w);
                        let params = vec![("word", w.clone()), ("cell", cell_label(cell))];
                        vec![self.check(suite, "cocycle-conjugation", params, self.cap(), |d| {
                            let c = self.cocycle(d)?;
                            let probes = lift_all(&self.probe_set("cocycle", cell, Coefficients::Cyclotomic)?, d);
                            c.conjugation_check(&lift_sigma(&sigma, d), &g, &probes, &self.opts)
                        })]
                    }));
                }
            }
        }
        jobs
    }

    // ---- descent

    fn descent(&self) -> Vec<Job<'_>> {
        let suite = Suite::Descent;
        let mut jobs: Vec<Job> = Vec::new();
        jobs.push(Box::new(move || {
            if !self.cfg.wants("averaging-certificate") {
                return Vec::new();
            }
            let (res, ms) = timed(|| self.splitting(self.base()));
            match res {
                Ok(s) => {
                    let params = vec![
                        ("theta", cyclotomic_text(s.theta())),
                        ("transversal", s.transversal().len().to_string()),
                        ("depth", self.base().to_string()),
                    ];
                    let r = TwistReport::passed("averaging-certificate", vec![], 0);
                    vec![Record::from_twist(suite, r, &params, ms)]
                }
                Err(e) => vec![Record::error(suite, "averaging-certificate", &[], &e.to_string(), ms)],
            }
        }));
        let Ok(transversal) = self.cocycle(self.base()).map(|c| c.transversal()) else { return jobs };
        if !self.cfg.wants("splitting") {
            return jobs;
        }
        for &cell in &self.cfg.cells {
            for sigma in &transversal {
                let sigma = *sigma;
                jobs.push(Box::new(move || {
                    vec![self.check(suite, "splitting", vec![("cell", cell_label(cell))], self.cap(), |d| {
                        let s = self.splitting(d)?;
                        let probes = lift_all(&self.probe_set("descent", cell, Coefficients::Cyclotomic)?, d);
                        s.split_check(&lift_sigma(&sigma, d), &probes, &self.opts)
                    })]
                }));
            }
        }
        jobs
    }

    // ---- main theorem

    fn main_theorem_at(&self, g: &SymplecticElement, label: &str, cell: (i64, i64), d: u32) -> weil_core::Result<TwistReport> {
        let s = self.splitting(d)?;
        let probes = lift_all(&self.probe_set("main-theorem", cell, Coefficients::Biquadratic)?, d);
        s.main_theorem_check(g, label, &probes, &self.opts)
    }

    /// The check at the working depth (deepened to at most `N + 1`) and,
    /// when asked, again one level deeper.
    /// `draw` numbers the attempt for random words; fixed words pass `None`.
    fn main_theorem_records(&self, w: &str, cell: (i64, i64), draw: Option<i64>) -> Option<Vec<Record>> {
        let strict = draw.is_none();
        let suite = Suite::MainTheorem;
        let g = self.word(w);
        let cap = self.base() + 1;
        let ((depth, res), ms) = timed(|| deepening(self.base(), cap, |d| self.main_theorem_at(&g, w, cell, d)));
        let mut params = vec![("cell", cell_label(cell)), ("depth", depth.to_string())];
        if let Some(a) = draw {
            params.push(("draw", a.to_string()));
        }
        let first = match res {
            Err(e) if !strict && is_resource_error(&e) => return None,
            Err(e) => {
                let mut params = params;
                params.push(("g", w.to_string()));
                Record::error(suite, "rational-conjugate", &params, &e.to_string(), ms)
            }
            Ok(r) => Record::from_twist(suite, r, &params, ms),
        };
        let mut out = vec![first];
        if self.cfg.stability {
            let deeper = depth.max(self.base() + 1);
            let (again, ms) = timed(|| {
                if deeper == depth {
                    Ok(out[0].pass)
                } else {
                    self.main_theorem_at(&g, w, cell, deeper).map(|r| r.pass)
                }
            });
            let params = vec![
                ("g", w.to_string()),
                ("cell", cell_label(cell)),
                ("depths", format!("{depth}->{deeper}")),
            ];
            out.push(match again {
                Ok(pass) if pass == out[0].pass => {
                    Record::from_twist(suite, TwistReport::passed("stability-in-N", vec![], 0), &params, ms)
                }
                Ok(pass) => Record::error(
                    suite,
                    "stability-in-N",
                    &params,
                    &format!("outcome changed from {} to {pass}", out[0].pass),
                    ms,
                ),
                Err(e) => Record::error(suite, "stability-in-N", &params, &e.to_string(), ms),
            });
        }
        Some(out)
    }

    fn main_theorem(&self) -> Vec<Job<'_>> {
        let (p, n) = (self.cfg.p, self.cfg.n);
        let mut jobs: Vec<Job> = Vec::new();
        if !self.wants_any(&["rational-conjugate", "stability-in-N"]) {
            return jobs;
        }
        for &cell in &self.cfg.cells {
            for w in generators(p, n) {
                jobs.push(Box::new(move || self.main_theorem_records(&w, cell, None).expect("strict checks always report")));
            }
            for slot in 0..self.cfg.words as i64 {
                jobs.push(Box::new(move || {
                    for attempt in 0..RESAMPLE_ATTEMPTS as i64 {
                        let mut r = rng(self.cfg.seed, stream("main-theorem-word", &[slot, attempt, cell.0, cell.1]));
                        let w = random_word(&mut r, p, n);
                        if let Some(records) = self.main_theorem_records(&w, cell, Some(attempt)) {
                            return records;
                        }
                    }
                    let msg = format!("no word within depth {} in {RESAMPLE_ATTEMPTS} attempts", self.base() + 1);
                    vec![Record::error(Suite::MainTheorem, "rational-conjugate", &[("slot", slot.to_string())], &msg, 0)]
                }));
            }
        }
        jobs
    }
}

fn pow_q(p: u64, e: i64) -> Q {
    weil_core::rational::pow_p(p, e)
}

/// `s ∈ {p, 1/p, 2, ε}` with `ε` the Teichmüller lift at depth `N`.
fn twist_values(p: u64, depth: u32) -> Vec<Q> {
    vec![q(p as i64), frac(1, p as i64), q(2), q(teichmuller(p, depth) as i64)]
}

/// Generators plus products whose measures are not trivial.
fn measure_elements(p: u64, n: usize) -> Vec<String> {
    let mut out = generators(p, n);
    out.push(format!("tau1*unip(1/{p})*levi(2)"));
    out.push(format!("g({p})*tau1*unip(1)"));
    out.push(format!("tau{n}*g(1/{p})*tau1"));
    out
}

fn scalar_record(
    suite: Suite,
    name: &str,
    params: Vec<(&str, String)>,
    lhs: weil_core::CyclotomicNumber,
    rhs: weil_core::CyclotomicNumber,
) -> Record {
    let r = if lhs == rhs {
        TwistReport::passed(name, vec![], 0)
    } else {
        TwistReport::failed(name, vec![], 0, weil_core::Witness::Scalars { lhs, rhs })
    };
    Record::from_twist(suite, r, &params, 0)
}
