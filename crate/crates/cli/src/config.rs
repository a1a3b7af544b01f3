//! `maestro-config/1` file: optional defaults for lambda, eta, the search
//! grids, and playability thresholds. Command-line flags override file
//! values; the file overrides built-in defaults.

use maestro_core::canon::{self, as_int, as_list, as_real, FormatError, MapView};
use maestro_core::generate::{
    default_alpha_grid, default_delta_grid, default_tau_grid, DEFAULT_ETA,
};
use maestro_core::playability::PlayabilityConfig;
use maestro_core::regression::DEFAULT_LAMBDA;

pub const CONFIG_VERSION: &str = "maestro-config/1";

#[derive(Debug, Clone)]
pub struct Defaults {
    pub lambda: f64,
    pub eta: f64,
    pub delta_grid: Vec<i32>,
    pub alpha_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub min_performed_ms: f64,
    pub saturation_threshold: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        let playability = PlayabilityConfig::default();
        Defaults {
            lambda: DEFAULT_LAMBDA,
            eta: DEFAULT_ETA,
            delta_grid: default_delta_grid(),
            alpha_grid: default_alpha_grid(),
            tau_grid: default_tau_grid(),
            min_performed_ms: playability.min_performed_ms,
            saturation_threshold: playability.saturation_threshold,
        }
    }
}

impl Defaults {
    /// Applies a config file on top of the built-in defaults. Unknown keys
    /// are rejected.
    pub fn from_file(text: &str) -> Result<Defaults, FormatError> {
        let body = canon::parse_document(text, CONFIG_VERSION)?;
        let mut view = MapView::new(&body, "")?;
        let mut defaults = Defaults::default();

        if let Some(v) = view.take("lambda") {
            defaults.lambda = as_real(v, "lambda")?;
        }
        if let Some(v) = view.take("eta") {
            defaults.eta = as_real(v, "eta")?;
        }
        if let Some(v) = view.take("delta_grid") {
            defaults.delta_grid = as_list(v, "delta_grid")?
                .iter()
                .map(|x| as_int(x, "delta_grid").map(|i| i as i32))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = view.take("alpha_grid") {
            defaults.alpha_grid = as_list(v, "alpha_grid")?
                .iter()
                .map(|x| as_real(x, "alpha_grid"))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = view.take("tau_grid") {
            defaults.tau_grid = as_list(v, "tau_grid")?
                .iter()
                .map(|x| as_real(x, "tau_grid"))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = view.take("min_performed_ms") {
            defaults.min_performed_ms = as_real(v, "min_performed_ms")?;
        }
        if let Some(v) = view.take("saturation_threshold") {
            defaults.saturation_threshold = as_real(v, "saturation_threshold")?;
        }
        view.finish()?;
        Ok(defaults)
    }

    pub fn playability(&self) -> PlayabilityConfig {
        PlayabilityConfig {
            min_performed_ms: self.min_performed_ms,
            saturation_threshold: self.saturation_threshold,
            ..PlayabilityConfig::default()
        }
    }

    /// One-line-per-field echo for --verbose.
    pub fn describe(&self) -> String {
        let reals = |xs: &[f64]| {
            xs.iter()
                .map(|&x| canon::format_real(x))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let ints = |xs: &[i32]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!(
            "effective config: lambda {} | eta {} | delta_grid [{}] | alpha_grid [{}] | tau_grid [{}] | min_performed_ms {} | saturation_threshold {}",
            canon::format_real(self.lambda),
            canon::format_real(self.eta),
            ints(&self.delta_grid),
            reals(&self.alpha_grid),
            reals(&self.tau_grid),
            canon::format_real(self.min_performed_ms),
            canon::format_real(self.saturation_threshold),
        )
    }
}
