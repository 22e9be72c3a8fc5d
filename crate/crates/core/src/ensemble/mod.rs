//! Particle systems: the interacting `n`-particle scheme, independent copies
//! driven by a frozen measure flow, the Picard iteration on flows, and the
//! propagation-of-chaos experiment.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coefficients::{CoefficientSet, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::geometry::search::sample_ball;
use crate::geometry::{DirectionField, TimeDomain};
use crate::grid::TimeGrid;
use crate::noise::NoiseDriver;
use crate::reflection::{self, advance, check_grid, check_start, Law, ReflectedPath, ReflectedState, StepScratch};
use crate::transport::w2_distance;

mod chaos;
mod picard;

pub use chaos::{chaos_experiment, ChaosRow, ChaosTable};
pub use picard::{picard_iterate, PicardResult};

/// Domain, direction field and coefficients of one reflected equation.
#[derive(Clone)]
pub struct Model {
    pub domain: Arc<dyn TimeDomain>,
    pub field: Arc<dyn DirectionField>,
    pub coefficients: Arc<CoefficientSet>,
}

impl Model {
    pub fn new(
        domain: Arc<dyn TimeDomain>,
        field: Arc<dyn DirectionField>,
        coefficients: Arc<CoefficientSet>,
    ) -> Result<Self> {
        if domain.dim() != coefficients.dim() {
            return Err(Error::Shape {
                what: "coefficient dimension",
                expected: domain.dim(),
                got: coefficients.dim(),
            });
        }
        Ok(Model {
            domain,
            field,
            coefficients,
        })
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.coefficients.noise_dim()
    }
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("dim", &self.dim())
            .field("rho", &self.field.rho())
            .field("coefficients", &self.coefficients)
            .finish_non_exhaustive()
    }
}

/// Initial distribution: uniform on the ball of radius `spread` about
/// `center`, conditioned on `D̄_0`. Particle `i` always gets the same draw for
/// a given seed.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialLaw {
    pub center: Vec<f64>,
    pub spread: f64,
    pub seed: u64,
}

impl InitialLaw {
    pub fn point(x0: &[f64]) -> Self {
        InitialLaw {
            center: x0.to_vec(),
            spread: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        InitialLaw { seed, ..self.clone() }
    }

    pub fn is_deterministic(&self) -> bool {
        self.spread == 0.0
    }

    pub fn sample(&self, i: usize, domain: &(impl TimeDomain + ?Sized)) -> Result<Vec<f64>> {
        if self.center.len() != domain.dim() {
            return Err(Error::Shape {
                what: "initial point",
                expected: domain.dim(),
                got: self.center.len(),
            });
        }
        if self.spread == 0.0 {
            return Ok(self.center.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        for _ in 0..10_000 {
            let x = sample_ball(&self.center, self.spread, &mut rng);
            if domain.dist(0.0, &x) == 0.0 {
                return Ok(x);
            }
        }
        Err(Error::InvalidArgument(format!(
            "initial ball about {:?} of radius {} misses the initial section",
            self.center, self.spread
        )))
    }

    pub fn sample_n(&self, n: usize, domain: &(impl TimeDomain + ?Sized)) -> Result<Vec<Vec<f64>>> {
        (0..n).map(|i| self.sample(i, domain)).collect()
    }
}

/// One empirical measure per grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureFlow {
    grid: TimeGrid,
    measures: Vec<EmpiricalMeasure>,
}

impl MeasureFlow {
    pub fn new(grid: TimeGrid, measures: Vec<EmpiricalMeasure>) -> Result<Self> {
        if measures.len() != grid.n_nodes() {
            return Err(Error::Shape {
                what: "measure flow",
                expected: grid.n_nodes(),
                got: measures.len(),
            });
        }
        let d = measures[0].dim();
        if measures.iter().any(|m| m.dim() != d) {
            return Err(Error::InvalidArgument("measures of differing dimension in one flow".into()));
        }
        Ok(MeasureFlow { grid, measures })
    }

    pub fn constant(grid: TimeGrid, mu: EmpiricalMeasure) -> Self {
        let measures = vec![mu; grid.n_nodes()];
        MeasureFlow { grid, measures }
    }

    /// `t_k ↦ δ_{ψ_{t_k}}`.
    pub fn dirac_flow(path: &ReflectedPath) -> Self {
        let measures = (0..path.n_nodes()).map(|k| EmpiricalMeasure::dirac(path.position(k))).collect();
        MeasureFlow {
            grid: path.grid().clone(),
            measures,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    pub fn measure(&self, k: usize) -> &EmpiricalMeasure {
        &self.measures[k]
    }

    pub fn measures(&self) -> &[EmpiricalMeasure] {
        &self.measures
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::Shape {
                what: "measure flow dimension",
                expected: d,
                got: self.dim(),
            });
        }
        Ok(())
    }

    /// `W₂` between the two flows at every node.
    pub fn node_distances(&self, other: &MeasureFlow) -> Result<Vec<f64>> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::InvalidArgument("flows live on different grids".into()));
        }
        self.measures
            .par_iter()
            .zip(&other.measures)
            .map(|(a, b)| w2_distance(a, b))
            .collect()
    }

    /// `sup_k W₂(μ_{t_k}, ν_{t_k})`.
    pub fn sup_distance(&self, other: &MeasureFlow) -> Result<f64> {
        Ok(self.node_distances(other)?.into_iter().fold(0.0, f64::max))
    }
}

/// `n` reflected paths on one grid, with the noise stream of each.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    grid: TimeGrid,
    dim: usize,
    paths: Vec<ReflectedPath>,
    streams: Vec<u64>,
}

impl ParticleEnsemble {
    pub fn new(paths: Vec<ReflectedPath>, streams: Vec<u64>) -> Result<Self> {
        let first = paths
            .first()
            .ok_or_else(|| Error::InvalidArgument("ensemble needs at least one path".into()))?;
        let (grid, dim) = (first.grid().clone(), first.dim());
        if paths.iter().any(|p| !p.grid().same_as(&grid) || p.dim() != dim) {
            return Err(Error::InvalidArgument("ensemble paths must share grid and dimension".into()));
        }
        if streams.len() != paths.len() {
            return Err(Error::Shape {
                what: "stream ids",
                expected: paths.len(),
                got: streams.len(),
            });
        }
        Ok(ParticleEnsemble {
            grid,
            dim,
            paths,
            streams,
        })
    }

    pub fn n(&self) -> usize {
        self.paths.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn path(&self, i: usize) -> &ReflectedPath {
        &self.paths[i]
    }

    pub fn paths(&self) -> &[ReflectedPath] {
        &self.paths
    }

    pub fn streams(&self) -> &[u64] {
        &self.streams
    }

    pub fn position(&self, i: usize, k: usize) -> &[f64] {
        self.paths[i].position(k)
    }

    /// Uniform measure on the positions at node `k`, atoms in canonical order.
    pub fn measure_at(&self, k: usize) -> EmpiricalMeasure {
        let pts: Vec<f64> = self.paths.iter().flat_map(|p| p.position(k).iter().copied()).collect();
        EmpiricalMeasure::uniform_canonical(self.dim, &pts).expect("ensemble is nonempty")
    }

    pub fn flow(&self) -> MeasureFlow {
        let measures = (0..self.grid.n_nodes()).into_par_iter().map(|k| self.measure_at(k)).collect();
        MeasureFlow {
            grid: self.grid.clone(),
            measures,
        }
    }

    /// Mean position at every node.
    pub fn mean_path(&self) -> Vec<Vec<f64>> {
        (0..self.grid.n_nodes()).map(|k| self.measure_at(k).mean()).collect()
    }
}

/// How the measure argument is supplied to a particle system.
#[derive(Clone, Copy)]
pub(crate) enum Coupling<'a> {
    /// Step-start empirical measure of the particles themselves.
    Interacting,
    /// A given flow, the same for every particle.
    Frozen(&'a MeasureFlow),
}

pub(crate) struct Run<'a> {
    pub model: &'a Model,
    pub grid: &'a TimeGrid,
    pub starts: &'a [Vec<f64>],
    pub streams: &'a [u64],
    pub driver: &'a NoiseDriver,
    pub scale: f64,
    pub coupling: Coupling<'a>,
    /// One `m`-vector per step, shared by every particle.
    pub control: Option<&'a [f64]>,
}

impl Run<'_> {
    fn validate(&self) -> Result<()> {
        check_grid(self.model, self.grid)?;
        if self.starts.is_empty() {
            return Err(Error::InvalidArgument("particle count must be at least 1".into()));
        }
        if self.starts.len() != self.streams.len() {
            return Err(Error::Shape {
                what: "stream ids",
                expected: self.starts.len(),
                got: self.streams.len(),
            });
        }
        if self.driver.noise_dim() != self.model.noise_dim() {
            return Err(Error::Shape {
                what: "noise dimension",
                expected: self.model.noise_dim(),
                got: self.driver.noise_dim(),
            });
        }
        if !(self.scale >= 0.0) || !self.scale.is_finite() {
            return Err(Error::InvalidArgument(format!("noise scale {} must be finite and >= 0", self.scale)));
        }
        for x0 in self.starts {
            check_start(self.model, x0)?;
        }
        if let Coupling::Frozen(flow) = self.coupling {
            if !flow.grid().same_as(self.grid) {
                return Err(Error::InvalidArgument("frozen flow lives on a different grid".into()));
            }
            flow.check_dim(self.model.dim())?;
        }
        if let Some(c) = self.control {
            if c.len() != self.grid.n_steps() * self.model.noise_dim() {
                return Err(Error::Shape {
                    what: "control values",
                    expected: self.grid.n_steps() * self.model.noise_dim(),
                    got: c.len(),
                });
            }
        }
        Ok(())
    }

    pub fn execute(&self) -> Result<ParticleEnsemble> {
        self.validate()?;
        let paths = match self.coupling {
            Coupling::Frozen(flow) => self.frozen(flow)?,
            Coupling::Interacting => self.interacting()?,
        };
        ParticleEnsemble::new(paths, self.streams.to_vec())
    }

    fn frozen(&self, flow: &MeasureFlow) -> Result<Vec<ReflectedPath>> {
        self.starts
            .par_iter()
            .zip(self.streams)
            .enumerate()
            .map(|(i, (x0, &stream))| {
                reflection::record(
                    self.model,
                    x0,
                    self.grid,
                    Law::Flow(flow),
                    &mut |k, dt, out| self.driver.increment(stream, k, dt, out),
                    self.scale,
                    self.control,
                )
                .map_err(|e| match e {
                    Error::Step { step, source, .. } => Error::Step {
                        particle: Some(i),
                        step,
                        source,
                    },
                    other => other,
                })
            })
            .collect()
    }

    fn interacting(&self) -> Result<Vec<ReflectedPath>> {
        let d = self.model.dim();
        let m = self.model.noise_dim();
        let measure_free = self.model.coefficients.is_measure_free();
        let mut states: Vec<ReflectedState> = self.starts.iter().map(|x| ReflectedState::start(x)).collect();
        let mut paths: Vec<ReflectedPath> = self
            .starts
            .iter()
            .map(|x| ReflectedPath::with_start(self.grid.clone(), x))
            .collect();
        let placeholder = EmpiricalMeasure::dirac(&vec![0.0; d]);
        for k in 0..self.grid.n_steps() {
            let snapshot;
            let mu = if measure_free {
                &placeholder
            } else {
                let pts: Vec<f64> = states.iter().flat_map(|s| s.x.iter().copied()).collect();
                snapshot = EmpiricalMeasure::uniform_canonical(d, &pts)?;
                &snapshot
            };
            let dt = self.grid.dt(k);
            let t_next = self.grid.time(k + 1);
            let h = self.control.map(|c| &c[k * m..(k + 1) * m]);
            let results: Vec<Result<(ReflectedState, f64)>> = states
                .par_iter()
                .zip(self.streams)
                .map_init(
                    || (StepScratch::new(self.model), vec![0.0; m]),
                    |(scratch, dw), (s, &stream)| {
                        self.driver.increment(stream, k, dt, dw);
                        advance(self.model, s, mu, t_next, dw, self.scale, h, scratch)
                    },
                )
                .collect();
            for (i, (r, (state, path))) in results.into_iter().zip(states.iter_mut().zip(&mut paths)).enumerate() {
                let (next, xi) = r.map_err(|e| e.at_step(Some(i), k))?;
                path.push(&next, xi);
                *state = next;
            }
        }
        Ok(paths)
    }
}

fn starts_for(model: &Model, init: &InitialLaw, n: usize) -> Result<Vec<Vec<f64>>> {
    init.sample_n(n, model.domain.as_ref())
}

/// The `n`-particle system in which every particle sees the step-start
/// empirical measure of all particles. Particle `i` uses noise stream `i`.
pub fn simulate_interacting(
    model: &Model,
    n: usize,
    init: &InitialLaw,
    grid: &TimeGrid,
    driver: &NoiseDriver,
    noise_scale: f64,
) -> Result<ParticleEnsemble> {
    if n == 0 {
        return Err(Error::InvalidArgument("particle count must be at least 1".into()));
    }
    let starts = starts_for(model, init, n)?;
    let streams: Vec<u64> = (0..n as u64).collect();
    simulate_interacting_from(model, &starts, &streams, grid, driver, noise_scale)
}

/// [`simulate_interacting`] with explicit start points and stream ids.
pub fn simulate_interacting_from(
    model: &Model,
    starts: &[Vec<f64>],
    streams: &[u64],
    grid: &TimeGrid,
    driver: &NoiseDriver,
    noise_scale: f64,
) -> Result<ParticleEnsemble> {
    Run {
        model,
        grid,
        starts,
        streams,
        driver,
        scale: noise_scale,
        coupling: Coupling::Interacting,
        control: None,
    }
    .execute()
}

/// `n_copies` independent solutions of the equation with the measure
/// argument frozen at `flow`. Copy `i` uses noise stream `i`.
pub fn simulate_frozen_law(
    model: &Model,
    init: &InitialLaw,
    flow: &MeasureFlow,
    driver: &NoiseDriver,
    noise_scale: f64,
    n_copies: usize,
) -> Result<ParticleEnsemble> {
    if n_copies == 0 {
        return Err(Error::InvalidArgument("copy count must be at least 1".into()));
    }
    let starts = starts_for(model, init, n_copies)?;
    let streams: Vec<u64> = (0..n_copies as u64).collect();
    Run {
        model,
        grid: flow.grid(),
        starts: &starts,
        streams: &streams,
        driver,
        scale: noise_scale,
        coupling: Coupling::Frozen(flow),
        control: None,
    }
    .execute()
}

/// Noise-free path whose measure argument is the Dirac mass at its own state.
pub(crate) fn self_dirac_path(model: &Model, x0: &[f64], grid: &TimeGrid) -> Result<ReflectedPath> {
    check_grid(model, grid)?;
    check_start(model, x0)?;
    reflection::record(
        model,
        x0,
        grid,
        Law::SelfDirac,
        &mut |_, _, out| out.iter_mut().for_each(|v| *v = 0.0),
        0.0,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{preset, Functional, InteractionKernel, PresetParams};
    use crate::geometry::{BuiltinDomain, FieldKind, MovingInterval, PresetField};

    pub(crate) fn interval_model(r: f64, amp: f64, cs: CoefficientSet) -> Model {
        let dom = Arc::new(BuiltinDomain::Interval(MovingInterval::new(r, amp, 1.0, 1.0).unwrap()));
        let field = PresetField::new(dom.clone(), FieldKind::Normal, 0.5).unwrap();
        Model::new(dom, Arc::new(field), Arc::new(cs)).unwrap()
    }

    fn mean_reversion(sigma: f64, r: f64) -> CoefficientSet {
        let p = PresetParams {
            sigma: Some(sigma),
            ..Default::default()
        };
        preset("mean_reversion", &p, 1, r).unwrap()
    }

    #[test]
    fn single_particle_matches_self_dirac_path() {
        let m = interval_model(1.0, 0.25, mean_reversion(0.0, 1.25));
        let grid = TimeGrid::uniform(1.0, 50).unwrap();
        let drv = NoiseDriver::new(1, 1);
        let e = simulate_interacting(&m, 1, &InitialLaw::point(&[0.3]), &grid, &drv, 1.0).unwrap();
        let p = self_dirac_path(&m, &[0.3], &grid).unwrap();
        assert_eq!(e.path(0), &p);
    }

    // Two bodies with b = mean − x: the midpoint stays at 1 and the gap
    // contracts by (1 − dt) per step.
    #[test]
    fn two_body_symmetry() {
        let m = interval_model(10.0, 0.0, mean_reversion(0.0, 10.0));
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let drv = NoiseDriver::new(0, 1);
        let e = simulate_interacting_from(&m, &[vec![0.0], vec![2.0]], &[0, 1], &grid, &drv, 1.0).unwrap();
        for k in 0..=20 {
            let (a, b) = (e.position(0, k)[0], e.position(1, k)[0]);
            assert!((a + b - 2.0).abs() < 1e-12);
            let gap = 2.0 * 0.95f64.powi(k as i32);
            assert!(((b - a) - gap).abs() < 1e-12);
        }
    }

    #[test]
    fn permuting_particles_permutes_the_ensemble() {
        let m = interval_model(1.0, 0.25, mean_reversion(1.0, 1.25));
        let grid = TimeGrid::uniform(1.0, 40).unwrap();
        let drv = NoiseDriver::new(9, 1);
        let init = InitialLaw {
            center: vec![0.0],
            spread: 0.8,
            seed: 4,
        };
        let starts = init.sample_n(7, m.domain.as_ref()).unwrap();
        let streams: Vec<u64> = (0..7).collect();
        let a = simulate_interacting_from(&m, &starts, &streams, &grid, &drv, 1.0).unwrap();
        let perm = [3usize, 0, 6, 1, 5, 2, 4];
        let ps: Vec<Vec<f64>> = perm.iter().map(|&i| starts[i].clone()).collect();
        let pst: Vec<u64> = perm.iter().map(|&i| streams[i]).collect();
        let b = simulate_interacting_from(&m, &ps, &pst, &grid, &drv, 1.0).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(a.path(i), b.path(j));
        }
    }

    #[test]
    fn frozen_law_without_interaction_ignores_the_flow() {
        let cs = preset("ou", &PresetParams::default(), 1, 1.25).unwrap();
        let m = interval_model(1.0, 0.25, cs);
        let grid = TimeGrid::uniform(1.0, 30).unwrap();
        let drv = NoiseDriver::new(2, 1);
        let f1 = MeasureFlow::constant(grid.clone(), EmpiricalMeasure::dirac(&[0.5]));
        let f2 = MeasureFlow::constant(grid.clone(), EmpiricalMeasure::dirac(&[-0.7]));
        let init = InitialLaw::point(&[0.1]);
        let a = simulate_frozen_law(&m, &init, &f1, &drv, 1.0, 16).unwrap();
        let b = simulate_frozen_law(&m, &init, &f2, &drv, 1.0, 16).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_law_on_dirac_limit_without_noise_is_the_limit() {
        let m = interval_model(1.0, 0.25, mean_reversion(0.0, 1.25));
        let grid = TimeGrid::uniform(1.0, 40).unwrap();
        let psi = self_dirac_path(&m, &[0.9], &grid).unwrap();
        let flow = MeasureFlow::dirac_flow(&psi);
        let e = simulate_frozen_law(&m, &InitialLaw::point(&[0.9]), &flow, &NoiseDriver::new(0, 1), 1.0, 4).unwrap();
        assert!(e.paths().iter().all(|p| p == &psi));
    }

    // Mean paths of the interacting system and of frozen copies driven by its
    // own flow agree within a few standard errors of the mean.
    #[test]
    fn frozen_copies_reproduce_the_interacting_mean() {
        let m = interval_model(1.0, 0.25, mean_reversion(1.0, 1.25));
        let grid = TimeGrid::uniform(1.0, 50).unwrap();
        let init = InitialLaw::point(&[0.2]);
        let inter = simulate_interacting(&m, 512, &init, &grid, &NoiseDriver::new(5, 1), 1.0).unwrap();
        let flow = inter.flow();
        let frozen = simulate_frozen_law(&m, &init, &flow, &NoiseDriver::new(6, 1), 1.0, 512).unwrap();
        let (ma, mb) = (inter.mean_path(), frozen.mean_path());
        for k in 0..=50 {
            let sd = inter.measure_at(k).std().max(frozen.measure_at(k).std());
            let se = sd * (2.0 / 512.0f64).sqrt();
            assert!((ma[k][0] - mb[k][0]).abs() <= 4.0 * se + 1e-12, "node {k}");
        }
    }

    // Independence across copies: the sample correlation of terminal
    // positions of copies 2i and 2i+1 is within 4/sqrt(pairs) of zero.
    #[test]
    fn frozen_copies_are_uncorrelated() {
        let m = interval_model(1.0, 0.25, mean_reversion(1.0, 1.25));
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let flow = MeasureFlow::constant(grid.clone(), EmpiricalMeasure::dirac(&[0.0]));
        let e = simulate_frozen_law(&m, &InitialLaw::point(&[0.0]), &flow, &NoiseDriver::new(8, 1), 1.0, 2000).unwrap();
        let xs: Vec<f64> = (0..1000).map(|i| e.path(2 * i).terminal()[0]).collect();
        let ys: Vec<f64> = (0..1000).map(|i| e.path(2 * i + 1).terminal()[0]).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (mean(&xs), mean(&ys));
        let cov: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / 1000.0;
        let vx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / 1000.0;
        let vy: f64 = ys.iter().map(|b| (b - my).powi(2)).sum::<f64>() / 1000.0;
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 4.0 / 1000f64.sqrt(), "corr {corr}");
    }

    #[test]
    fn containment_and_local_time_invariants() {
        let m = interval_model(1.0, 0.25, mean_reversion(1.5, 1.25));
        let grid = TimeGrid::uniform(1.0, 100).unwrap();
        let e = simulate_interacting(&m, 64, &InitialLaw::point(&[0.0]), &grid, &NoiseDriver::new(1, 1), 1.0).unwrap();
        let tol = m.domain.tol_boundary();
        let mut pushes = 0;
        for p in e.paths() {
            for k in 0..=100 {
                assert!(m.domain.dist(grid.time(k), p.position(k)) <= tol);
            }
            for k in 0..100 {
                assert!(p.local_time(k + 1) >= p.local_time(k));
                let dk: f64 = crate::vecops::dist(p.reflector(k + 1), p.reflector(k));
                assert!(dk <= p.xi(k) + 1e-12);
                if p.xi(k) > 0.0 {
                    pushes += 1;
                    let sd = m.domain.signed_distance(grid.time(k + 1), p.position(k + 1)).unwrap();
                    assert!(sd.abs() <= tol);
                }
            }
        }
        assert!(pushes > 0);
    }

    #[test]
    fn errors_carry_particle_and_step() {
        let drift = Functional::Kernel(InteractionKernel::zero().with_self_term(|_, _, o| o[0] = f64::NAN));
        let cs = CoefficientSet::new(1, 1, drift, Functional::Kernel(InteractionKernel::zero()));
        let m = interval_model(1.0, 0.0, cs);
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let e = simulate_interacting(&m, 3, &InitialLaw::point(&[0.0]), &grid, &NoiseDriver::new(0, 1), 1.0)
            .unwrap_err();
        assert!(matches!(e, Error::Step { particle: Some(0), step: 0, .. }), "{e}");
    }

    #[test]
    fn start_outside_is_rejected() {
        let m = interval_model(1.0, 0.0, mean_reversion(1.0, 1.0));
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let e = simulate_interacting(&m, 2, &InitialLaw::point(&[1.5]), &grid, &NoiseDriver::new(0, 1), 1.0);
        assert!(matches!(e, Err(Error::InvalidArgument(_))));
    }
}
