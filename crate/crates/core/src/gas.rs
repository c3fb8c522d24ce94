//! Event-driven kinetics of a 2D ideal gas with selective membranes.
//!
//! Units: `k = m = 1`. Particles never interact, so each one is advanced
//! independently between global events (thermostat applications, membrane
//! arrivals) by exact piecewise-linear flight. All barriers are vertical
//! lines, so the x and y motions only couple through the event clock.
//!
//! With flat walls and no inter-particle collisions the x and y motions
//! never exchange energy, so membrane work would drain only the x degree of
//! freedom. Membrane processes therefore redraw the split of every speed
//! between `|vx|` and `|vy|` at each thermostat step, keeping the speed (so
//! the energy ledger is untouched) and the signs of both components (so no
//! particle reverses and the density field near a moving membrane survives).
//!
//! Origin tags are stored on the particle rather than re-derived from its
//! trajectory. Trajectories are deterministic and never cross, so the stored
//! tag carries the same information an observer could reconstruct.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_QUASI_STATIC_RATIO: f64 = 0.01;
/// Thermostat interval as a fraction of the box-crossing time
/// `width / sqrt(kT/m)`.
pub const DEFAULT_THERMOSTAT_INTERVAL: f64 = 0.1;

const MAX_EVENTS_PER_PARTICLE: u64 = 10_000_000;
/// Particles per parallel work unit. Fixed, so reductions are summed in the
/// same order whatever the thread count.
const CHUNK: usize = 64;
/// Relative slack allowed when a membrane lands on a wall.
const POSITION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Left,
    Right,
    Untagged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub species: Species,
    origin: Origin,
}

impl Particle {
    pub fn new(position: [f64; 2], velocity: [f64; 2], species: Species) -> Self {
        Self {
            position,
            velocity,
            species,
            origin: Origin::Untagged,
        }
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * (self.velocity[0] * self.velocity[0] + self.velocity[1] * self.velocity[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxGeometry {
    pub width: f64,
    pub height: f64,
    partition_x: Option<f64>,
}

impl BoxGeometry {
    pub fn new(width: f64, height: f64, partition_x: Option<f64>) -> Result<Self> {
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
            return Err(Error::Config(format!(
                "box dimensions must be positive, got {width} x {height}"
            )));
        }
        if let Some(px) = partition_x {
            if !(px > 0.0 && px < width) {
                return Err(Error::Config(format!(
                    "partition at {px} outside (0, {width})"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            partition_x,
        })
    }

    /// Unit square split in the middle.
    pub fn unit_with_partition() -> Self {
        Self {
            width: 1.0,
            height: 1.0,
            partition_x: Some(0.5),
        }
    }

    pub fn partition_x(&self) -> Option<f64> {
        self.partition_x
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Which particles a membrane lets through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Selectivity {
    /// Passes the listed species, reflects the rest.
    BySpecies(Vec<Species>),
    /// Passes particles whose origin tag equals the given side.
    ByOrigin(Origin),
    Opaque,
    Transparent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membrane {
    pub x: f64,
    pub speed: f64,
    pub selectivity: Selectivity,
}

impl Membrane {
    pub fn passes(&self, particle: &Particle) -> bool {
        match &self.selectivity {
            Selectivity::BySpecies(set) => set.contains(&particle.species),
            Selectivity::ByOrigin(side) => particle.origin == *side,
            Selectivity::Opaque => false,
            Selectivity::Transparent => true,
        }
    }
}

/// Reflection off a mirror moving with normal velocity `speed`.
pub fn reflect_off_moving(vx: f64, speed: f64) -> f64 {
    2.0 * speed - vx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Surface {
    LeftWall,
    RightWall,
    BottomWall,
    TopWall,
    Partition,
    Membrane(usize),
}

impl std::fmt::Display for Surface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Surface::LeftWall => write!(f, "left-wall"),
            Surface::RightWall => write!(f, "right-wall"),
            Surface::BottomWall => write!(f, "bottom-wall"),
            Surface::TopWall => write!(f, "top-wall"),
            Surface::Partition => write!(f, "partition"),
            Surface::Membrane(i) => write!(f, "membrane-{i}"),
        }
    }
}

/// Momentum and energy exchanged with boundaries during one `advance` call.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvanceReport {
    pub duration: f64,
    /// Absolute normal impulse on left, right, bottom and top walls.
    pub wall_impulse: [f64; 4],
    pub partition_impulse: f64,
    pub membrane_impulse: Vec<f64>,
    /// Work done by the gas on each membrane (minus the gas energy change).
    pub membrane_work: Vec<f64>,
    pub events: u64,
}

impl AdvanceReport {
    fn empty(duration: f64, n_membranes: usize) -> Self {
        Self {
            duration,
            wall_impulse: [0.0; 4],
            partition_impulse: 0.0,
            membrane_impulse: vec![0.0; n_membranes],
            membrane_work: vec![0.0; n_membranes],
            events: 0,
        }
    }

    fn absorb(&mut self, other: &AdvanceReport) {
        for (a, b) in self.wall_impulse.iter_mut().zip(other.wall_impulse) {
            *a += b;
        }
        self.partition_impulse += other.partition_impulse;
        for (a, b) in self.membrane_impulse.iter_mut().zip(&other.membrane_impulse) {
            *a += b;
        }
        for (a, b) in self.membrane_work.iter_mut().zip(&other.membrane_work) {
            *a += b;
        }
        self.events += other.events;
    }

    pub fn total_work(&self) -> f64 {
        self.membrane_work.iter().sum()
    }

    pub fn impulse(&self, surface: Surface) -> Option<f64> {
        match surface {
            Surface::LeftWall => Some(self.wall_impulse[0]),
            Surface::RightWall => Some(self.wall_impulse[1]),
            Surface::BottomWall => Some(self.wall_impulse[2]),
            Surface::TopWall => Some(self.wall_impulse[3]),
            Surface::Partition => Some(self.partition_impulse),
            Surface::Membrane(i) => self.membrane_impulse.get(i).copied(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerSample {
    pub time: f64,
    pub membrane_id: usize,
    pub pressure: f64,
    pub work_cum: f64,
    pub heat_cum: f64,
}

/// Heat and work bookkeeping for an isothermal membrane process.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessLedger {
    pub target_temperature: f64,
    pub work_on_membranes: f64,
    pub heat_injected: f64,
    pub samples: Vec<LedgerSample>,
    /// `heat_injected / target_temperature`, in units of k.
    pub delta_s: f64,
    pub kinetic_initial: f64,
    pub kinetic_final: f64,
    pub warnings: Vec<String>,
}

impl ProcessLedger {
    pub fn new(target_temperature: f64) -> Self {
        Self {
            target_temperature,
            work_on_membranes: 0.0,
            heat_injected: 0.0,
            samples: Vec::new(),
            delta_s: 0.0,
            kinetic_initial: 0.0,
            kinetic_final: 0.0,
            warnings: Vec::new(),
        }
    }

    pub fn record_advance(&mut self, report: &AdvanceReport) {
        self.work_on_membranes += report.total_work();
    }

    pub fn record_heat(&mut self, heat: f64) {
        self.heat_injected += heat;
        self.delta_s = self.heat_injected / self.target_temperature;
    }

    /// `heat - work - (KE_final - KE_initial)`, zero up to rounding.
    pub fn closure_residual(&self) -> f64 {
        self.heat_injected
            - self.work_on_membranes
            - (self.kinetic_final - self.kinetic_initial)
    }
}

/// Selector used by the reversible mixing run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingMode {
    DifferentGasesBySpecies,
    SameGasByOrigin,
    SameGasBySpecies,
}

impl MixingMode {
    pub fn by_species(self) -> bool {
        !matches!(self, MixingMode::SameGasByOrigin)
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub particles: Vec<Particle>,
    pub geometry: BoxGeometry,
    pub membranes: Vec<Membrane>,
    pub time: f64,
    pub rng: ChaCha8Rng,
    pub target_temperature: f64,
    /// Largest allowed `|membrane speed| / sqrt(kT/m)`.
    pub quasi_static_ratio: f64,
}

#[derive(Debug, Clone, Copy)]
enum BarrierKind {
    LeftWall,
    RightWall,
    Partition,
    Membrane(usize),
}

#[derive(Debug, Clone, Copy)]
struct Barrier {
    x0: f64,
    speed: f64,
    kind: BarrierKind,
}

/// Which side of a barrier a particle is on (+1 right, -1 left). Exact
/// contact is resolved by the relative velocity, which after a reflection
/// always points away from the barrier.
fn side_of(x: f64, vx: f64, barrier_x: f64, barrier_speed: f64) -> f64 {
    if x < barrier_x || (x == barrier_x && vx - barrier_speed < 0.0) {
        -1.0
    } else {
        1.0
    }
}

impl SimState {
    /// Builds a state from explicit particles. Positions must lie inside the
    /// box and off the partition line.
    pub fn from_particles(
        particles: Vec<Particle>,
        geometry: BoxGeometry,
        temperature: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
        }
        for (i, p) in particles.iter().enumerate() {
            let [x, y] = p.position;
            if !(0.0..=geometry.width).contains(&x) || !(0.0..=geometry.height).contains(&y) {
                return Err(Error::Config(format!("particle {i} at {:?} outside the box", p.position)));
            }
        }
        Ok(Self {
            particles,
            geometry,
            membranes: Vec::new(),
            time: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            target_temperature: temperature,
            quasi_static_ratio: DEFAULT_QUASI_STATIC_RATIO,
        })
    }

    pub fn n_particles(&self) -> usize {
        self.particles.len()
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.particles.iter().map(Particle::kinetic_energy).sum()
    }

    pub fn thermal_speed(&self) -> f64 {
        self.target_temperature.sqrt()
    }

    pub fn crossing_time(&self) -> f64 {
        self.geometry.width / self.thermal_speed()
    }

    pub fn surface_length(&self, surface: Surface) -> Result<f64> {
        match surface {
            Surface::LeftWall | Surface::RightWall => Ok(self.geometry.height),
            Surface::BottomWall | Surface::TopWall => Ok(self.geometry.width),
            Surface::Partition if self.geometry.partition_x.is_some() => Ok(self.geometry.height),
            Surface::Membrane(i) if i < self.membranes.len() => Ok(self.geometry.height),
            other => Err(Error::UnknownSurface(other.to_string())),
        }
    }

    /// Count of particles strictly left of `x` with the given origin.
    pub fn count_left_of(&self, x: f64, origin: Option<Origin>) -> usize {
        self.particles
            .iter()
            .filter(|p| origin.is_none_or(|o| p.origin == o) && p.position[0] < x)
            .count()
    }

    /// Partition removal: tags every untagged particle with the side it
    /// occupies now. Existing tags are kept.
    pub fn remove_partition(&mut self) -> Result<()> {
        let Some(px) = self.geometry.partition_x else {
            return Err(Error::State("partition already removed".into()));
        };
        for p in &mut self.particles {
            if p.origin == Origin::Untagged {
                p.origin = if side_of(p.position[0], p.velocity[0], px, 0.0) < 0.0 {
                    Origin::Left
                } else {
                    Origin::Right
                };
            }
        }
        self.geometry.partition_x = None;
        Ok(())
    }

    /// Inserts an opaque partition. Particles exactly on the line are pushed
    /// one ulp in the direction they move.
    pub fn insert_partition(&mut self, x: f64) -> Result<()> {
        if self.geometry.partition_x.is_some() {
            return Err(Error::State("partition already present".into()));
        }
        if !(x > 0.0 && x < self.geometry.width) {
            return Err(Error::Config(format!("partition at {x} outside the box")));
        }
        self.nudge_off_line(x);
        self.geometry.partition_x = Some(x);
        Ok(())
    }

    /// Adds a membrane and returns its id.
    pub fn install_membrane(&mut self, membrane: Membrane) -> Result<usize> {
        if !(membrane.x >= 0.0 && membrane.x <= self.geometry.width) {
            return Err(Error::Simulation(format!(
                "membrane at {} outside the box",
                membrane.x
            )));
        }
        self.check_quasi_static(membrane.speed)?;
        self.nudge_off_line(membrane.x);
        self.membranes.push(membrane);
        Ok(self.membranes.len() - 1)
    }

    fn nudge_off_line(&mut self, x: f64) {
        let width = self.geometry.width;
        for p in &mut self.particles {
            if p.position[0] == x {
                let up = if x <= 0.0 {
                    true
                } else if x >= width {
                    false
                } else {
                    p.velocity[0] >= 0.0
                };
                p.position[0] = if up { x.next_up() } else { x.next_down() };
            }
        }
    }

    pub fn check_quasi_static(&self, speed: f64) -> Result<()> {
        let limit = self.quasi_static_ratio * self.thermal_speed();
        if !speed.is_finite() || speed.abs() > limit * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "membrane speed {speed} exceeds quasi-static limit {limit}"
            )));
        }
        Ok(())
    }

    /// Free flight with exact boundary events for `duration`.
    pub fn advance(&mut self, duration: f64) -> Result<AdvanceReport> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::Config(format!("advance duration must be >= 0, got {duration}")));
        }
        let width = self.geometry.width;
        let height = self.geometry.height;
        let slack = POSITION_SLACK * width;
        let mut new_positions = Vec::with_capacity(self.membranes.len());
        for (i, m) in self.membranes.iter().enumerate() {
            let x_end = m.x + m.speed * duration;
            if x_end < -slack || x_end > width + slack {
                return Err(Error::Simulation(format!(
                    "membrane {i} would leave the box (x = {x_end})"
                )));
            }
            new_positions.push(x_end.clamp(0.0, width));
        }

        let mut barriers = vec![
            Barrier { x0: 0.0, speed: 0.0, kind: BarrierKind::LeftWall },
            Barrier { x0: width, speed: 0.0, kind: BarrierKind::RightWall },
        ];
        if let Some(px) = self.geometry.partition_x {
            barriers.push(Barrier { x0: px, speed: 0.0, kind: BarrierKind::Partition });
        }
        for (i, m) in self.membranes.iter().enumerate() {
            barriers.push(Barrier { x0: m.x, speed: m.speed, kind: BarrierKind::Membrane(i) });
        }

        let membranes = &self.membranes;
        let n_membranes = membranes.len();
        let partials: Vec<Result<AdvanceReport>> = self
            .particles
            .par_chunks_mut(CHUNK)
            .map(|chunk| {
                let mut acc = AdvanceReport::empty(duration, n_membranes);
                for p in chunk {
                    fly(p, &barriers, membranes, height, duration, &mut acc)?;
                }
                Ok(acc)
            })
            .collect();

        let mut report = AdvanceReport::empty(duration, n_membranes);
        for partial in partials {
            report.absorb(&partial?);
        }
        for (m, x) in self.membranes.iter_mut().zip(new_positions) {
            m.x = x;
        }
        self.time += duration;
        Ok(report)
    }

    /// Time-averaged 2D pressure (impulse per unit length per unit time) on
    /// `surface`, measured while the state advances by `window`.
    pub fn measure_pressure(&mut self, surface: Surface, window: f64) -> Result<f64> {
        if !(window.is_finite() && window > 0.0) {
            return Err(Error::Config(format!("pressure window must be > 0, got {window}")));
        }
        let length = self.surface_length(surface)?;
        let report = self.advance(window)?;
        let impulse = report
            .impulse(surface)
            .ok_or_else(|| Error::UnknownSurface(surface.to_string()))?;
        Ok(impulse / (window * length))
    }

    /// Rescales all velocities so the total kinetic energy is `N k T`.
    /// Returns the (signed) heat added.
    pub fn thermostat(&mut self) -> Result<f64> {
        if self.particles.is_empty() {
            return Err(Error::Thermostat("no particles to thermostat".into()));
        }
        let before = self.kinetic_energy();
        if !(before > 0.0) {
            return Err(Error::Thermostat("total kinetic energy is zero".into()));
        }
        let target = self.particles.len() as f64 * self.target_temperature;
        let factor = (target / before).sqrt();
        if factor != 1.0 {
            for p in &mut self.particles {
                p.velocity[0] *= factor;
                p.velocity[1] *= factor;
            }
        }
        Ok(self.kinetic_energy() - before)
    }

    /// Redraws each velocity angle uniformly within its quadrant, keeping
    /// the speed and the signs of both components.
    pub fn isotropize(&mut self) {
        for p in &mut self.particles {
            let [vx, vy] = p.velocity;
            let speed = vx.hypot(vy);
            let angle = self.rng.gen::<f64>() * std::f64::consts::FRAC_PI_2;
            let (s, c) = angle.sin_cos();
            p.velocity = [
                (speed * c).copysign(vx),
                (speed * s).copysign(vy),
            ];
        }
    }

    /// Thermostat application whose heat goes into `ledger`.
    pub fn thermostat_into(&mut self, ledger: &mut ProcessLedger) -> Result<f64> {
        let heat = self.thermostat()?;
        ledger.record_heat(heat);
        Ok(heat)
    }

    fn population_species(&self, origin: Origin) -> Vec<Species> {
        let mut set = Vec::new();
        for p in self.particles.iter().filter(|p| p.origin == origin) {
            if !set.contains(&p.species) {
                set.push(p.species);
            }
        }
        set
    }

    /// Moves membranes at constant speed until each reaches its target,
    /// thermostatting after every step of at most `interval`.
    fn run_membranes(
        &mut self,
        targets: &[f64],
        interval: f64,
        ledger: &mut ProcessLedger,
    ) -> Result<()> {
        let slack = POSITION_SLACK * self.geometry.width;
        loop {
            let mut dt = interval;
            let mut moving = false;
            for (m, &target) in self.membranes.iter().zip(targets) {
                if m.speed != 0.0 {
                    moving = true;
                    dt = dt.min(((target - m.x) / m.speed).max(0.0));
                }
            }
            if !moving {
                break;
            }
            let report = self.advance(dt)?;
            ledger.record_advance(&report);
            for (m, &target) in self.membranes.iter_mut().zip(targets) {
                if m.speed != 0.0 && (target - m.x) * m.speed.signum() <= slack {
                    m.x = target;
                    m.speed = 0.0;
                }
            }
            self.isotropize();
            self.thermostat_into(ledger)?;
            let length = self.geometry.height;
            for (id, impulse) in report.membrane_impulse.iter().enumerate() {
                let pressure = if dt > 0.0 { impulse / (dt * length) } else { 0.0 };
                ledger.samples.push(LedgerSample {
                    time: self.time,
                    membrane_id: id,
                    pressure,
                    work_cum: ledger.work_on_membranes,
                    heat_cum: ledger.heat_injected,
                });
            }
        }
        Ok(())
    }

    fn check_process_args(&self, membrane_speed: f64, interval: f64) -> Result<()> {
        if !(membrane_speed > 0.0) {
            return Err(Error::Config(format!("membrane speed must be > 0, got {membrane_speed}")));
        }
        self.check_quasi_static(membrane_speed)?;
        if !(interval.is_finite() && interval > 0.0) {
            return Err(Error::Config(format!("thermostat interval must be > 0, got {interval}")));
        }
        Ok(())
    }

    /// Reversible mixing: the partition is replaced by two membranes that
    /// slide to opposite walls, each holding back one population while the
    /// other expands through it. Heat from the bath gives `delta_s`.
    ///
    /// Before the ledger opens, the gas is thermostatted once so that the
    /// sampled initial kinetic energy does not leak into the heat balance.
    pub fn run_reversible_mixing(
        &mut self,
        mode: MixingMode,
        membrane_speed: f64,
        thermostat_interval: f64,
    ) -> Result<ProcessLedger> {
        self.check_process_args(membrane_speed, thermostat_interval)?;
        if !self.membranes.is_empty() {
            return Err(Error::State("membranes already installed".into()));
        }
        let Some(center) = self.geometry.partition_x else {
            return Err(Error::State(
                "reversible mixing starts from a partitioned box".into(),
            ));
        };
        self.remove_partition()?;
        self.thermostat()?;

        let mut ledger = ProcessLedger::new(self.target_temperature);
        ledger.kinetic_initial = self.kinetic_energy();

        let left_species = self.population_species(Origin::Left);
        let right_species = self.population_species(Origin::Right);
        let (pass_right_pop, pass_left_pop) = if mode.by_species() {
            let same = left_species.iter().any(|s| right_species.contains(s));
            match (mode, same) {
                (MixingMode::DifferentGasesBySpecies, true) => ledger.warnings.push(
                    "species-selective membranes on identical gases: null experiment".into(),
                ),
                (MixingMode::SameGasBySpecies, false) => ledger
                    .warnings
                    .push("same-gas mode applied to different species".into()),
                _ => {}
            }
            (
                Selectivity::BySpecies(right_species),
                Selectivity::BySpecies(left_species),
            )
        } else {
            (
                Selectivity::ByOrigin(Origin::Right),
                Selectivity::ByOrigin(Origin::Left),
            )
        };

        // membrane 0 confines the left population and recedes to the right wall
        self.install_membrane(Membrane {
            x: center,
            speed: membrane_speed,
            selectivity: pass_right_pop,
        })?;
        self.install_membrane(Membrane {
            x: center,
            speed: -membrane_speed,
            selectivity: pass_left_pop,
        })?;
        let targets = [self.geometry.width, 0.0];
        let outcome = self.run_membranes(&targets, thermostat_interval, &mut ledger);
        self.membranes.clear();
        outcome?;
        ledger.kinetic_final = self.kinetic_energy();
        Ok(ledger)
    }

    /// Reverses the mixing process with origin-selective membranes sweeping
    /// from the walls to the middle, then closes the partition there.
    pub fn run_unmixing(
        &mut self,
        membrane_speed: f64,
        thermostat_interval: f64,
    ) -> Result<ProcessLedger> {
        self.check_process_args(membrane_speed, thermostat_interval)?;
        if self.particles.iter().any(|p| p.origin == Origin::Untagged) {
            return Err(Error::State("unmixing needs origin-tagged particles".into()));
        }
        if self.geometry.partition_x.is_some() {
            return Err(Error::State("unmixing needs the partition removed".into()));
        }
        if !self.membranes.is_empty() {
            return Err(Error::State("membranes already installed".into()));
        }
        self.thermostat()?;
        let mut ledger = ProcessLedger::new(self.target_temperature);
        ledger.kinetic_initial = self.kinetic_energy();

        let width = self.geometry.width;
        let center = 0.5 * width;
        self.install_membrane(Membrane {
            x: 0.0,
            speed: membrane_speed,
            selectivity: Selectivity::ByOrigin(Origin::Left),
        })?;
        self.install_membrane(Membrane {
            x: width,
            speed: -membrane_speed,
            selectivity: Selectivity::ByOrigin(Origin::Right),
        })?;
        let outcome = self.run_membranes(&[center, center], thermostat_interval, &mut ledger);
        self.membranes.clear();
        outcome?;
        self.insert_partition(center)?;
        ledger.kinetic_final = self.kinetic_energy();
        Ok(ledger)
    }
}

/// Two populations in the halves of a partitioned box, velocity components
/// drawn from `N(0, kT/m)`.
pub fn init_gas(
    n_left: usize,
    n_right: usize,
    species_left: Species,
    species_right: Species,
    temperature: f64,
    seed: u64,
) -> Result<SimState> {
    init_gas_in(
        BoxGeometry::unit_with_partition(),
        n_left,
        n_right,
        species_left,
        species_right,
        temperature,
        seed,
    )
}

pub fn init_gas_in(
    geometry: BoxGeometry,
    n_left: usize,
    n_right: usize,
    species_left: Species,
    species_right: Species,
    temperature: f64,
    seed: u64,
) -> Result<SimState> {
    if n_left == 0 || n_right == 0 {
        return Err(Error::Config(format!(
            "both halves need particles, got {n_left} and {n_right}"
        )));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
    }
    let Some(px) = geometry.partition_x else {
        return Err(Error::Config("initial geometry needs a partition".into()));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, temperature.sqrt())
        .map_err(|e| Error::Config(format!("velocity distribution: {e}")))?;
    let mut particles = Vec::with_capacity(n_left + n_right);
    let halves = [(0.0, px, n_left, species_left), (px, geometry.width, n_right, species_right)];
    for (lo, hi, count, species) in halves {
        for _ in 0..count {
            let x = open_uniform(&mut rng, lo, hi);
            let y = open_uniform(&mut rng, 0.0, geometry.height);
            let v = [normal.sample(&mut rng), normal.sample(&mut rng)];
            particles.push(Particle::new([x, y], v, species));
        }
    }
    Ok(SimState {
        particles,
        geometry,
        membranes: Vec::new(),
        time: 0.0,
        rng,
        target_temperature: temperature,
        quasi_static_ratio: DEFAULT_QUASI_STATIC_RATIO,
    })
}

fn open_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let x = lo + (hi - lo) * rng.gen::<f64>();
        if x > lo && x < hi {
            return x;
        }
    }
}

fn fly(
    p: &mut Particle,
    barriers: &[Barrier],
    membranes: &[Membrane],
    height: f64,
    duration: f64,
    acc: &mut AdvanceReport,
) -> Result<()> {
    let opaque_list: Vec<(usize, f64)> = barriers
        .iter()
        .enumerate()
        .filter(|(_, b)| match b.kind {
            BarrierKind::Membrane(i) => !membranes[i].passes(p),
            _ => true,
        })
        .map(|(j, b)| {
            let side = match b.kind {
                BarrierKind::LeftWall => 1.0,
                BarrierKind::RightWall => -1.0,
                _ => side_of(p.position[0], p.velocity[0], b.x0, b.speed),
            };
            (j, side)
        })
        .collect();

    let [mut x, mut y] = p.position;
    let [mut vx, mut vy] = p.velocity;
    let mut s = 0.0;
    let mut events = 0u64;
    loop {
        let mut t_x = f64::INFINITY;
        let mut hit = None;
        for &(j, side) in &opaque_list {
            let b = &barriers[j];
            let rate = side * (vx - b.speed);
            if rate < 0.0 {
                let gap = (side * (x - (b.x0 + b.speed * s))).max(0.0);
                let t = s + gap / -rate;
                if t < t_x {
                    t_x = t;
                    hit = Some(j);
                }
            }
        }
        let t_y = if vy > 0.0 {
            s + (height - y) / vy
        } else if vy < 0.0 {
            s + y / -vy
        } else {
            f64::INFINITY
        };
        let t_next = t_x.min(t_y);
        if t_next > duration {
            x += vx * (duration - s);
            y += vy * (duration - s);
            break;
        }
        let dt = t_next - s;
        s = t_next;
        events += 1;
        if events > MAX_EVENTS_PER_PARTICLE {
            return Err(Error::Simulation(
                "event limit exceeded; particle trapped between converging barriers".into(),
            ));
        }
        if t_x <= t_y {
            let b = &barriers[hit.expect("x event without barrier")];
            y += vy * dt;
            x = b.x0 + b.speed * s;
            let v_new = reflect_off_moving(vx, b.speed);
            let impulse = (v_new - vx).abs();
            match b.kind {
                BarrierKind::LeftWall => acc.wall_impulse[0] += impulse,
                BarrierKind::RightWall => acc.wall_impulse[1] += impulse,
                BarrierKind::Partition => acc.partition_impulse += impulse,
                BarrierKind::Membrane(i) => {
                    acc.membrane_impulse[i] += impulse;
                    acc.membrane_work[i] -= 0.5 * (v_new * v_new - vx * vx);
                }
            }
            vx = v_new;
        } else {
            x += vx * dt;
            if vy > 0.0 {
                y = height;
                acc.wall_impulse[3] += 2.0 * vy;
            } else {
                y = 0.0;
                acc.wall_impulse[2] += -2.0 * vy;
            }
            vy = -vy;
        }
    }
    p.position = [x, y];
    p.velocity = [vx, vy];
    acc.events += events;
    Ok(())
}
