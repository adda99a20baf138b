//! Multi-zone nonlinear RC building used as ground truth.
//!
//! Each zone stores heat in a lumped capacitance and exchanges it with the
//! ambient and with neighbouring zones. HVAC thermal power is a saturating
//! (`tanh`) function of electrical power with an outdoor-temperature dependent
//! COP, so the load/temperature map is smooth but not affine. A proportional
//! thermostat with a comfort guard generates the closed-loop training days;
//! [`evaluate_temperature`] replays arbitrary load profiles open loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{DataError, DatasetRole, DayOfWeek, DayRecord, ExplanatoryRecord, TrainingDataset};

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("invalid plant configuration: {0}")]
    Config(String),
    #[error("weather has {got} periods, expected {expected}")]
    WeatherLength { got: usize, expected: usize },
    #[error("load {load:.4} kW below base load {base:.4} kW at period {t}")]
    BelowBase { t: usize, load: f64, base: f64 },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HvacMode {
    #[default]
    Cooling,
    Heating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneConfig {
    /// Thermal capacitance, kWh/°C.
    pub capacitance: f64,
    /// Conductance to ambient, kW/°C.
    pub ambient_conductance: f64,
    /// Volume used for the building-average temperature, m³.
    pub volume: f64,
    /// Fractions of HVAC, internal and solar heat delivered to this zone.
    pub hvac_share: f64,
    pub gain_share: f64,
    pub solar_share: f64,
}

/// Step profile over the hours of a day: `occupied` between the two hours, `unoccupied` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayProfile {
    pub unoccupied: f64,
    pub occupied: f64,
    pub start_hour: f64,
    pub end_hour: f64,
}

impl DayProfile {
    pub fn constant(v: f64) -> Self {
        Self { unoccupied: v, occupied: v, start_hour: 0.0, end_hour: 24.0 }
    }

    pub fn at(&self, hour: f64) -> f64 {
        if hour >= self.start_hour && hour < self.end_hour {
            self.occupied
        } else {
            self.unoccupied
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeeklyProfile {
    pub weekday: DayProfile,
    pub weekend: DayProfile,
}

impl WeeklyProfile {
    pub fn same(p: DayProfile) -> Self {
        Self { weekday: p, weekend: p }
    }

    pub fn at(&self, dow: DayOfWeek, hour: f64) -> f64 {
        if dow.is_weekend() {
            self.weekend.at(hour)
        } else {
            self.weekday.at(hour)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub zones: Vec<ZoneConfig>,
    /// Inter-zone conductances `(zone_a, zone_b, kW/°C)`.
    pub couplings: Vec<(usize, usize, f64)>,
    /// Installed HVAC electrical capacity, kW.
    pub hvac_capacity: f64,
    /// Coefficient of performance at 25 °C outdoor.
    pub cop: f64,
    /// Relative COP loss per °C of outdoor temperature above 25 °C (cooling).
    pub cop_temp_slope: f64,
    /// `tanh` saturation scale relative to linear capacity; larger is closer to linear.
    pub saturation: f64,
    pub mode: HvacMode,
    /// Non-HVAC electrical load, kW.
    pub base_load: WeeklyProfile,
    /// Internal heat gains, kW thermal.
    pub internal_gains: WeeklyProfile,
    /// Solar heat gain per W/m² of irradiation, kW.
    pub solar_gain: f64,
    pub comfort_min: f64,
    pub comfort_max: f64,
    /// Thermostat setpoint schedule, °C.
    pub setpoint: WeeklyProfile,
    /// Proportional gain, electrical kW per °C.
    pub controller_gain: f64,
    /// Relative random excitation applied to the proportional command.
    pub excitation: f64,
    /// Half-width of the random setpoint offsets, °C: one per day plus half as much per period.
    #[serde(default)]
    pub setpoint_dither: f64,
    /// Distance from the comfort limits the thermostat guard keeps, °C.
    pub guard_margin: f64,
    /// Measurement noise on reported indoor temperatures, °C.
    pub noise_std: f64,
    pub substeps: usize,
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), PlantError> {
        let err = |m: &str| Err(PlantError::Config(m.to_string()));
        if self.zones.is_empty() {
            return err("at least one zone required");
        }
        for (i, z) in self.zones.iter().enumerate() {
            if !(z.capacitance > 0.0) {
                return Err(PlantError::Config(format!("zone {i}: capacitance must be > 0")));
            }
            if !(z.ambient_conductance >= 0.0) || !(z.volume > 0.0) {
                return Err(PlantError::Config(format!("zone {i}: conductance >= 0 and volume > 0 required")));
            }
        }
        for &(a, b, g) in &self.couplings {
            if a >= self.zones.len() || b >= self.zones.len() || a == b || !(g >= 0.0) {
                return err("bad inter-zone coupling");
            }
        }
        if !(self.hvac_capacity >= 0.0) || !(self.cop > 0.0) || !(self.saturation > 0.0) {
            return err("capacity >= 0, cop > 0 and saturation > 0 required");
        }
        if !(self.comfort_min < self.comfort_max) {
            return err("comfort_min must be below comfort_max");
        }
        if self.substeps == 0 || !(self.noise_std >= 0.0) {
            return err("substeps >= 1 and noise_std >= 0 required");
        }
        Ok(())
    }

    pub fn num_zones(&self) -> usize {
        self.zones.len()
    }

    fn period_hours(periods: usize) -> f64 {
        24.0 / periods as f64
    }

    /// Hour of day at the middle of 1-based period `t`.
    fn mid_hour(t: usize, periods: usize) -> f64 {
        (t as f64 - 0.5) * Self::period_hours(periods)
    }

    /// Base load of 1-based period `t`, kW.
    pub fn base_load_at(&self, weather: &DayWeather, t: usize) -> f64 {
        let hour = Self::mid_hour(t, weather.periods());
        self.base_load.at(weather.day_of_week, hour) * weather.occupancy
    }

    pub fn base_load_profile(&self, weather: &DayWeather) -> Vec<f64> {
        (1..=weather.periods()).map(|t| self.base_load_at(weather, t)).collect()
    }

    /// Volume-weighted average temperature.
    pub fn average_temperature(&self, state: &PlantState) -> f64 {
        let vol: f64 = self.zones.iter().map(|z| z.volume).sum();
        self.zones.iter().zip(&state.temps).map(|(z, x)| z.volume * x).sum::<f64>() / vol
    }

    /// HVAC thermal power (kW, ≥ 0) for electrical power `p_hvac`.
    pub fn hvac_thermal(&self, p_hvac: f64, outdoor: f64) -> f64 {
        let cop = match self.mode {
            HvacMode::Cooling => self.cop * (1.0 - self.cop_temp_slope * (outdoor - 25.0)).max(0.2),
            HvacMode::Heating => self.cop * (1.0 + self.cop_temp_slope * (outdoor - 5.0)).max(0.2),
        };
        let linear_cap = cop * self.hvac_capacity * self.saturation;
        if linear_cap <= 0.0 {
            return 0.0;
        }
        linear_cap * (cop * p_hvac / linear_cap).tanh()
    }

    /// Advances `state` over 1-based period `t` with constant HVAC electrical power.
    fn step(&self, state: &mut PlantState, p_hvac: f64, weather: &DayWeather, t: usize) {
        let periods = weather.periods();
        let hours = Self::period_hours(periods);
        let dt = hours / self.substeps as f64;
        let hour = Self::mid_hour(t, periods);
        let outdoor = weather.outdoor_temp[t - 1];
        let gains = self.internal_gains.at(weather.day_of_week, hour) * weather.occupancy;
        let solar = self.solar_gain * weather.solar[t - 1];
        let q = self.hvac_thermal(p_hvac.clamp(0.0, self.hvac_capacity), outdoor);
        let q_signed = match self.mode {
            HvacMode::Cooling => -q,
            HvacMode::Heating => q,
        };
        let n = self.zones.len();
        let mut flow = vec![0.0; n];
        for _ in 0..self.substeps {
            for (i, z) in self.zones.iter().enumerate() {
                flow[i] = z.ambient_conductance * (outdoor - state.temps[i])
                    + z.gain_share * gains
                    + z.solar_share * solar
                    + z.hvac_share * q_signed;
            }
            for &(a, b, g) in &self.couplings {
                let f = g * (state.temps[b] - state.temps[a]);
                flow[a] += f;
                flow[b] -= f;
            }
            for (i, z) in self.zones.iter().enumerate() {
                state.temps[i] += dt * flow[i] / z.capacitance;
            }
        }
    }

    /// Internal heat gain energy over period `t`, kWh (used in energy-balance checks).
    pub fn period_gain_energy(&self, weather: &DayWeather, t: usize) -> f64 {
        let hour = Self::mid_hour(t, weather.periods());
        let gains = self.internal_gains.at(weather.day_of_week, hour) * weather.occupancy;
        (gains * self.zones.iter().map(|z| z.gain_share).sum::<f64>()
            + self.solar_gain * weather.solar[t - 1] * self.zones.iter().map(|z| z.solar_share).sum::<f64>())
            * Self::period_hours(weather.periods())
    }

    /// Generator regime of a day: 0 for weekdays, 1 for weekends (2-regime configs only).
    pub fn regime(&self, dow: DayOfWeek) -> usize {
        if self.base_load.weekday == self.base_load.weekend
            && self.internal_gains.weekday == self.internal_gains.weekend
            && self.setpoint.weekday == self.setpoint.weekend
        {
            0
        } else {
            usize::from(dow.is_weekend())
        }
    }

    /// Large office: roughly 25 kW peak, 10 kW average in summer.
    pub fn office_large() -> Self {
        let zone = |c: f64, ua: f64, vol: f64, hvac: f64, gain: f64, solar: f64| ZoneConfig {
            capacitance: c,
            ambient_conductance: ua,
            volume: vol,
            hvac_share: hvac,
            gain_share: gain,
            solar_share: solar,
        };
        Self {
            zones: vec![
                zone(4.0, 0.15, 1500.0, 0.5, 0.5, 0.0),
                zone(2.5, 0.35, 900.0, 0.25, 0.25, 0.3),
                zone(2.5, 0.35, 900.0, 0.25, 0.25, 0.7),
            ],
            couplings: vec![(0, 1, 0.8), (0, 2, 0.8), (1, 2, 0.1)],
            hvac_capacity: 14.0,
            cop: 3.2,
            cop_temp_slope: 0.015,
            saturation: 1.3,
            mode: HvacMode::Cooling,
            base_load: WeeklyProfile {
                weekday: DayProfile { unoccupied: 3.5, occupied: 11.0, start_hour: 7.0, end_hour: 19.0 },
                weekend: DayProfile { unoccupied: 3.0, occupied: 4.5, start_hour: 9.0, end_hour: 17.0 },
            },
            internal_gains: WeeklyProfile {
                weekday: DayProfile { unoccupied: 0.5, occupied: 8.0, start_hour: 7.0, end_hour: 19.0 },
                weekend: DayProfile { unoccupied: 0.4, occupied: 1.5, start_hour: 9.0, end_hour: 17.0 },
            },
            solar_gain: 0.006,
            comfort_min: 20.0,
            comfort_max: 26.5,
            setpoint: WeeklyProfile {
                weekday: DayProfile { unoccupied: 25.0, occupied: 22.5, start_hour: 6.0, end_hour: 19.0 },
                weekend: DayProfile::constant(25.0),
            },
            controller_gain: 4.0,
            excitation: 0.35,
            setpoint_dither: 1.0,
            guard_margin: 0.2,
            noise_std: 0.05,
            substeps: 12,
        }
    }

    /// Small office: roughly 15 kW peak.
    pub fn office_small() -> Self {
        let mut cfg = Self::office_large();
        for z in &mut cfg.zones {
            z.capacitance *= 1.6;
            z.ambient_conductance *= 0.6;
            z.volume *= 0.6;
        }
        cfg.hvac_capacity = 8.0;
        cfg.base_load.weekday = DayProfile { unoccupied: 2.5, occupied: 6.5, start_hour: 7.0, end_hour: 18.0 };
        cfg.base_load.weekend = DayProfile { unoccupied: 2.2, occupied: 3.0, start_hour: 9.0, end_hour: 15.0 };
        cfg.internal_gains.weekday = DayProfile { unoccupied: 0.3, occupied: 4.5, start_hour: 7.0, end_hour: 18.0 };
        cfg.internal_gains.weekend = DayProfile { unoccupied: 0.3, occupied: 0.9, start_hour: 9.0, end_hour: 15.0 };
        cfg.solar_gain = 0.004;
        cfg.controller_gain = 2.5;
        cfg
    }

    /// Retail building with a large constant refrigeration base load.
    pub fn retail() -> Self {
        let mut cfg = Self::office_large();
        for z in &mut cfg.zones {
            z.capacitance *= 4.0;
            z.ambient_conductance *= 2.5;
            z.volume *= 3.0;
        }
        cfg.hvac_capacity = 40.0;
        cfg.base_load.weekday = DayProfile { unoccupied: 45.0, occupied: 70.0, start_hour: 7.0, end_hour: 22.0 };
        cfg.base_load.weekend = DayProfile { unoccupied: 45.0, occupied: 62.0, start_hour: 8.0, end_hour: 20.0 };
        cfg.internal_gains.weekday = DayProfile { unoccupied: 3.0, occupied: 22.0, start_hour: 7.0, end_hour: 22.0 };
        cfg.internal_gains.weekend = DayProfile { unoccupied: 3.0, occupied: 16.0, start_hour: 8.0, end_hour: 20.0 };
        cfg.setpoint = WeeklyProfile {
            weekday: DayProfile { unoccupied: 25.0, occupied: 22.5, start_hour: 6.0, end_hour: 22.0 },
            weekend: DayProfile { unoccupied: 25.0, occupied: 23.0, start_hour: 7.0, end_hour: 20.0 },
        };
        cfg.solar_gain = 0.02;
        cfg.controller_gain = 12.0;
        cfg
    }

    /// Same physics as [`office_large`](Self::office_large) with weekend schedules equal to weekday ones.
    pub fn single_regime(mut self) -> Self {
        self.base_load.weekend = self.base_load.weekday;
        self.internal_gains.weekend = self.internal_gains.weekday;
        self.setpoint.weekend = self.setpoint.weekday;
        self
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "office_large" => Some(Self::office_large()),
            "office_small" => Some(Self::office_small()),
            "retail" => Some(Self::retail()),
            "office_single_regime" => Some(Self::office_large().single_regime()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub temps: Vec<f64>,
}

impl PlantState {
    pub fn uniform(zones: usize, temp: f64) -> Self {
        Self { temps: vec![temp; zones] }
    }
}

/// Exogenous conditions of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayWeather {
    pub day_of_week: DayOfWeek,
    pub outdoor_temp: Vec<f64>,
    /// Global horizontal irradiation, W/m².
    pub solar: Vec<f64>,
    /// Occupancy multiplier on base load and internal gains.
    pub occupancy: f64,
}

impl DayWeather {
    pub fn periods(&self) -> usize {
        self.outdoor_temp.len()
    }

    pub fn constant(day_of_week: DayOfWeek, periods: usize, outdoor: f64) -> Self {
        Self { day_of_week, outdoor_temp: vec![outdoor; periods], solar: vec![0.0; periods], occupancy: 1.0 }
    }

    pub fn explanatory(&self) -> Vec<ExplanatoryRecord> {
        self.outdoor_temp
            .iter()
            .zip(&self.solar)
            .map(|(&o, &s)| ExplanatoryRecord {
                day_of_week: self.day_of_week,
                outdoor_temp: o,
                solar_irradiation: s,
                extra: Vec::new(),
            })
            .collect()
    }
}

/// Summer weather: seasonal mean with AR(1) day-to-day anomalies and a diurnal cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherGenerator {
    pub mean_temp: f64,
    pub seasonal_amplitude: f64,
    pub anomaly_std: f64,
    pub anomaly_persistence: f64,
    pub diurnal_amplitude: f64,
    pub solar_peak: f64,
    pub occupancy_std: f64,
}

impl Default for WeatherGenerator {
    fn default() -> Self {
        Self {
            mean_temp: 25.0,
            seasonal_amplitude: 1.5,
            anomaly_std: 1.0,
            anomaly_persistence: 0.7,
            diurnal_amplitude: 4.5,
            solar_peak: 850.0,
            occupancy_std: 0.03,
        }
    }
}

impl WeatherGenerator {
    pub fn generate(&self, n_days: usize, periods: usize, first_dow: DayOfWeek, seed: u64) -> Vec<DayWeather> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let hours = 24.0 / periods as f64;
        let mut anomaly = 0.0;
        let innovation = self.anomaly_std * (1.0 - self.anomaly_persistence.powi(2)).sqrt();
        (0..n_days)
            .map(|d| {
                anomaly = self.anomaly_persistence * anomaly + innovation * normal.sample(&mut rng);
                let season = self.seasonal_amplitude * (2.0 * std::f64::consts::PI * d as f64 / 120.0).sin();
                let mean = self.mean_temp + season + anomaly;
                let swing = self.diurnal_amplitude * (0.7 + 0.6 * rng.gen::<f64>());
                let clearness = 0.35 + 0.65 * rng.gen::<f64>();
                let occupancy = (1.0 + self.occupancy_std * normal.sample(&mut rng)).clamp(0.6, 1.4);
                let mut outdoor = Vec::with_capacity(periods);
                let mut solar = Vec::with_capacity(periods);
                for t in 1..=periods {
                    let h = (t as f64 - 0.5) * hours;
                    let jitter = 0.3 * normal.sample(&mut rng);
                    outdoor.push(mean + swing * (2.0 * std::f64::consts::PI * (h - 15.0) / 24.0).cos() + jitter);
                    let elevation = (std::f64::consts::PI * (h - 6.0) / 13.0).sin().max(0.0);
                    solar.push(self.solar_peak * clearness * elevation);
                }
                DayWeather {
                    day_of_week: DayOfWeek::from_index(first_dow.index() + d),
                    outdoor_temp: outdoor,
                    solar,
                    occupancy,
                }
            })
            .collect()
    }
}

fn check_weather(weather: &DayWeather, periods: usize) -> Result<(), PlantError> {
    if weather.solar.len() != periods || periods == 0 {
        return Err(PlantError::WeatherLength { got: weather.solar.len(), expected: periods });
    }
    Ok(())
}

/// Result of one closed-loop day, with the final state for chaining.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDay {
    pub record: DayRecord,
    pub hvac: Vec<f64>,
    pub final_state: PlantState,
}

/// Closed-loop thermostat day. `seed` drives excitation and measurement noise.
pub fn simulate_thermostat_day(
    cfg: &PlantConfig,
    weather: &DayWeather,
    x0: &PlantState,
    day_id: u32,
    seed: u64,
) -> Result<SimulatedDay, PlantError> {
    cfg.validate()?;
    let periods = weather.periods();
    check_weather(weather, periods)?;
    if x0.temps.len() != cfg.num_zones() {
        return Err(PlantError::Config(format!("state has {} zones, config {}", x0.temps.len(), cfg.num_zones())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, cfg.noise_std.max(f64::MIN_POSITIVE)).expect("finite std");
    let measure = |v: f64, rng: &mut ChaCha8Rng| if cfg.noise_std > 0.0 { v + noise.sample(rng) } else { v };

    let mut state = x0.clone();
    let initial = measure(cfg.average_temperature(&state), &mut rng);
    let mut last_measured = initial;
    let direction = match cfg.mode {
        HvacMode::Cooling => 1.0,
        HvacMode::Heating => -1.0,
    };
    let (lo, hi) = (cfg.comfort_min + cfg.guard_margin, cfg.comfort_max - cfg.guard_margin);

    let mut load = Vec::with_capacity(periods);
    let mut indoor = Vec::with_capacity(periods);
    let mut hvac = Vec::with_capacity(periods);
    let day_offset = cfg.setpoint_dither * (2.0 * rng.gen::<f64>() - 1.0);
    for t in 1..=periods {
        let hour = PlantConfig::mid_hour(t, periods);
        let sp = cfg.setpoint.at(weather.day_of_week, hour)
            + day_offset
            + 0.5 * cfg.setpoint_dither * (2.0 * rng.gen::<f64>() - 1.0);
        let excitation = 1.0 + cfg.excitation * (2.0 * rng.gen::<f64>() - 1.0);
        let mut u = (cfg.controller_gain * direction * (last_measured - sp) * excitation).clamp(0.0, cfg.hvac_capacity);

        // Comfort guard: one-period lookahead on the true plant.
        let end_temp = |u: f64| {
            let mut s = state.clone();
            cfg.step(&mut s, u, weather, t);
            cfg.average_temperature(&s)
        };
        let too_warm = |temp: f64| temp > hi;
        let too_cold = |temp: f64| temp < lo;
        let (needs_more, needs_less) = match cfg.mode {
            HvacMode::Cooling => (too_warm(end_temp(u)), too_cold(end_temp(u))),
            HvacMode::Heating => (too_cold(end_temp(u)), too_warm(end_temp(u))),
        };
        if needs_more || needs_less {
            let (mut a, mut b) = if needs_more { (u, cfg.hvac_capacity) } else { (0.0, u) };
            let target = if cfg.mode == HvacMode::Cooling { if needs_more { hi } else { lo } } else if needs_more { lo } else { hi };
            let ok = |temp: f64| match (cfg.mode, needs_more) {
                (HvacMode::Cooling, true) | (HvacMode::Heating, false) => temp <= target,
                _ => temp >= target,
            };
            if needs_more && !ok(end_temp(b)) {
                u = b;
            } else if needs_less && !ok(end_temp(a)) {
                u = a;
            } else {
                for _ in 0..50 {
                    let mid = 0.5 * (a + b);
                    let good = ok(end_temp(mid));
                    // Smallest change from the proportional command that satisfies the guard.
                    if needs_more == good {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                u = if needs_more { b } else { a };
            }
        }

        cfg.step(&mut state, u, weather, t);
        let avg = cfg.average_temperature(&state);
        last_measured = measure(avg, &mut rng);
        hvac.push(u);
        load.push(cfg.base_load_at(weather, t) + u);
        indoor.push(last_measured);
    }
    let record = DayRecord {
        day_id,
        initial_indoor_temp: initial,
        load,
        indoor_temp: indoor,
        outdoor_temp: weather.outdoor_temp.clone(),
        explanatory: weather.explanatory(),
    };
    Ok(SimulatedDay { record, hvac, final_state: state })
}

/// Noise-free open-loop average-temperature trajectory for a commanded total load.
pub fn evaluate_temperature(
    cfg: &PlantConfig,
    x0: &PlantState,
    load: &[f64],
    weather: &DayWeather,
) -> Result<Vec<f64>, PlantError> {
    cfg.validate()?;
    check_weather(weather, load.len())?;
    if weather.outdoor_temp.len() != load.len() {
        return Err(PlantError::WeatherLength { got: weather.outdoor_temp.len(), expected: load.len() });
    }
    let mut state = x0.clone();
    let mut out = Vec::with_capacity(load.len());
    for (i, &p) in load.iter().enumerate() {
        let t = i + 1;
        let base = cfg.base_load_at(weather, t);
        if p < base - 1e-12 {
            return Err(PlantError::BelowBase { t, load: p, base });
        }
        cfg.step(&mut state, (p - base).max(0.0), weather, t);
        out.push(cfg.average_temperature(&state));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Σ_t comfort-band exceedance of the average temperature, °C·h-periods.
    pub violation: f64,
    pub load_within_limits: bool,
    pub trajectory: Vec<f64>,
}

/// Membership test against the true feasible set of load profiles.
pub fn check_feasible(
    cfg: &PlantConfig,
    x0: &PlantState,
    load: &[f64],
    weather: &DayWeather,
) -> Result<Feasibility, PlantError> {
    let trajectory = evaluate_temperature(cfg, x0, load, weather)?;
    let violation = comfort_violation(cfg, &trajectory);
    let load_within_limits = load
        .iter()
        .enumerate()
        .all(|(i, &p)| p <= cfg.base_load_at(weather, i + 1) + cfg.hvac_capacity + 1e-12);
    Ok(Feasibility { feasible: load_within_limits && violation == 0.0, violation, load_within_limits, trajectory })
}

pub fn comfort_violation(cfg: &PlantConfig, trajectory: &[f64]) -> f64 {
    trajectory
        .iter()
        .map(|&th| (th - cfg.comfort_max).max(0.0) + (cfg.comfort_min - th).max(0.0))
        .sum()
}

/// A contiguous block of closed-loop days with its generator-side metadata.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub dataset: TrainingDataset,
    pub weather: Vec<DayWeather>,
    pub initial_states: Vec<PlantState>,
    pub hvac: Vec<Vec<f64>>,
    pub regimes: Vec<usize>,
}

/// Simulates `n_days` consecutive days, chaining the thermal state across midnight.
pub fn generate_days(
    cfg: &PlantConfig,
    weather_gen: &WeatherGenerator,
    n_days: usize,
    periods: usize,
    seed: u64,
) -> Result<GeneratedData, PlantError> {
    cfg.validate()?;
    let weather = weather_gen.generate(n_days, periods, DayOfWeek::Mon, seed);
    let mut state = PlantState::uniform(cfg.num_zones(), 0.5 * (cfg.comfort_min + cfg.comfort_max));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_da75);
    let mut days = Vec::with_capacity(n_days);
    let mut states = Vec::with_capacity(n_days);
    let mut hvac = Vec::with_capacity(n_days);
    let mut regimes = Vec::with_capacity(n_days);
    for (d, w) in weather.iter().enumerate() {
        states.push(state.clone());
        let sim = simulate_thermostat_day(cfg, w, &state, d as u32 + 1, rng.gen())?;
        state = sim.final_state;
        hvac.push(sim.hvac);
        regimes.push(cfg.regime(w.day_of_week));
        days.push(sim.record);
    }
    Ok(GeneratedData {
        dataset: TrainingDataset::new(days, periods, DatasetRole::Train)?,
        weather,
        initial_states: states,
        hvac,
        regimes,
    })
}

/// Exactly linear single-state building in RC-regression form:
/// `φ_{t+1} − φ_t = A_t (φ_t − φᵒᵘᵗ) + B_t p^hvac_t + D_t`, with `φ_1` driven from `φ_0` the same way.
/// Outdoor temperature is constant within a day so affine band models are also exact.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRcPlant {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    pub base_load: Vec<f64>,
}

impl LinearRcPlant {
    pub fn periods(&self) -> usize {
        self.base_load.len()
    }

    /// Random (but seeded) HVAC inputs, initial and outdoor temperatures.
    pub fn generate(&self, n_days: usize, seed: u64) -> Result<(TrainingDataset, Vec<Vec<f64>>), PlantError> {
        let periods = self.periods();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut days = Vec::with_capacity(n_days);
        let mut hvacs = Vec::with_capacity(n_days);
        for k in 0..n_days {
            let outdoor = 24.0 + 8.0 * rng.gen::<f64>();
            let phi0 = 22.0 + 2.0 * rng.gen::<f64>();
            let hvac: Vec<f64> = (0..periods).map(|_| 6.0 * rng.gen::<f64>()).collect();
            // φ_1 uses hvac_1 and the initial temperature; later steps follow the RC recursion.
            let mut temps = Vec::with_capacity(periods);
            let mut prev = phi0;
            for t in 0..periods {
                let (a, b, d) = if t == 0 { (self.a[0], self.b[0], self.d[0]) } else { (self.a[t - 1], self.b[t - 1], self.d[t - 1]) };
                let drive = if t == 0 { hvac[0] } else { hvac[t - 1] };
                let next = prev + a * (prev - outdoor) + b * drive + d;
                temps.push(next);
                prev = next;
            }
            let load: Vec<f64> = hvac.iter().zip(&self.base_load).map(|(h, b)| h + b).collect();
            let weather = DayWeather { day_of_week: DayOfWeek::from_index(k), outdoor_temp: vec![outdoor; periods], solar: vec![0.0; periods], occupancy: 1.0 };
            days.push(DayRecord {
                day_id: k as u32 + 1,
                initial_indoor_temp: phi0,
                load,
                indoor_temp: temps,
                outdoor_temp: vec![outdoor; periods],
                explanatory: weather.explanatory(),
            });
            hvacs.push(hvac);
        }
        Ok((TrainingDataset::new(days, periods, DatasetRole::Train)?, hvacs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hot_weather(periods: usize) -> DayWeather {
        DayWeather::constant(DayOfWeek::Wed, periods, 35.0)
    }

    #[test]
    fn isolated_idle_building_holds_temperature() {
        let mut cfg = PlantConfig::office_large();
        for z in &mut cfg.zones {
            z.ambient_conductance = 0.0;
        }
        cfg.couplings.clear();
        cfg.internal_gains = WeeklyProfile::same(DayProfile::constant(0.0));
        cfg.solar_gain = 0.0;
        cfg.hvac_capacity = 0.0;
        cfg.noise_std = 0.0;
        let x0 = PlantState::uniform(3, 23.0);
        let day = simulate_thermostat_day(&cfg, &hot_weather(24), &x0, 1, 7).unwrap();
        assert!(day.record.indoor_temp.iter().all(|&v| (v - 23.0).abs() < 1e-12));
    }

    #[test]
    fn no_capacity_drifts_toward_outdoor() {
        let mut cfg = PlantConfig::office_large();
        cfg.hvac_capacity = 0.0;
        cfg.internal_gains = WeeklyProfile::same(DayProfile::constant(0.0));
        cfg.noise_std = 0.0;
        let w = hot_weather(24);
        let x0 = PlantState::uniform(3, 22.0);
        let day = simulate_thermostat_day(&cfg, &w, &x0, 1, 3).unwrap();
        let temps = &day.record.indoor_temp;
        assert!(temps.windows(2).all(|p| p[1] > p[0] && p[1] < 35.0));
        assert_eq!(day.record.load, cfg.base_load_profile(&w));
    }

    #[test]
    fn open_loop_replay_matches_closed_loop() {
        let mut cfg = PlantConfig::office_large();
        cfg.noise_std = 0.0;
        let weather = WeatherGenerator::default().generate(3, 24, DayOfWeek::Mon, 11);
        let x0 = PlantState::uniform(3, 24.0);
        for w in &weather {
            let day = simulate_thermostat_day(&cfg, w, &x0, 1, 5).unwrap();
            let replay = evaluate_temperature(&cfg, &x0, &day.record.load, w).unwrap();
            for (a, b) in replay.iter().zip(&day.record.indoor_temp) {
                assert!((a - b).abs() < 1e-9);
            }
            let f = check_feasible(&cfg, &x0, &day.record.load, w).unwrap();
            assert!(f.feasible, "violation {}", f.violation);
        }
    }

    #[test]
    fn more_cooling_means_colder() {
        let cfg = PlantConfig::office_large();
        let w = hot_weather(24);
        let x0 = PlantState::uniform(3, 24.0);
        let base = cfg.base_load_profile(&w);
        let max: Vec<f64> = base.iter().map(|b| b + cfg.hvac_capacity).collect();
        let cold = evaluate_temperature(&cfg, &x0, &max, &w).unwrap();
        let warm = evaluate_temperature(&cfg, &x0, &base, &w).unwrap();
        assert!(cold.iter().zip(&warm).all(|(c, h)| c <= h));
        let f = check_feasible(&cfg, &x0, &base, &w).unwrap();
        assert!(!f.feasible && f.violation > 0.0);
    }

    #[test]
    fn below_base_load_is_rejected() {
        let cfg = PlantConfig::office_large();
        let w = hot_weather(4);
        let x0 = PlantState::uniform(3, 24.0);
        let mut p = cfg.base_load_profile(&w);
        p[2] -= 0.5;
        assert!(matches!(evaluate_temperature(&cfg, &x0, &p, &w), Err(PlantError::BelowBase { t: 3, .. })));
    }

    #[test]
    fn energy_balance_without_conductance() {
        let mut cfg = PlantConfig::office_large();
        for z in &mut cfg.zones {
            z.ambient_conductance = 0.0;
        }
        cfg.couplings = vec![(0, 1, 0.5), (1, 2, 0.3)];
        cfg.hvac_capacity = 0.0;
        cfg.noise_std = 0.0;
        let w = WeatherGenerator::default().generate(1, 24, DayOfWeek::Tue, 2).remove(0);
        let mut state = PlantState::uniform(3, 22.0);
        for t in 1..=24 {
            let before: f64 = cfg.zones.iter().zip(&state.temps).map(|(z, x)| z.capacitance * x).sum();
            cfg.step(&mut state, 0.0, &w, t);
            let after: f64 = cfg.zones.iter().zip(&state.temps).map(|(z, x)| z.capacitance * x).sum();
            assert!((after - before - cfg.period_gain_energy(&w, t)).abs() < 1e-9);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = PlantConfig::office_large();
        let a = generate_days(&cfg, &WeatherGenerator::default(), 10, 24, 4).unwrap();
        let b = generate_days(&cfg, &WeatherGenerator::default(), 10, 24, 4).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let c = generate_days(&cfg, &WeatherGenerator::default(), 10, 24, 5).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = PlantConfig::office_large();
        cfg.comfort_min = 27.0;
        assert!(cfg.validate().is_err());
        let mut cfg = PlantConfig::office_large();
        cfg.zones[0].capacitance = 0.0;
        assert!(cfg.validate().is_err());
    }
}
