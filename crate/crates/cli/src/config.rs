//! Experiment files: TOML with a fixed set of tables, unknown keys rejected.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use afdm::analysis::{fingerprint, AfdmSetup, BerConfig, SecurityConfig, SensingConfig, SensingPayload};
use afdm::channel::{ChannelProfile, Fading, DEFAULT_BANDWIDTH_HZ, DEFAULT_CARRIER_HZ};
use afdm::detection::EqualizerKind;
use afdm::transforms::ChirpParams;
use afdm::waveform::{c1_optimal, validate_orthogonality, AfdmConfig, Modem, OtfsConfig, Waveform};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Ber,
    Ambiguity,
    Papr,
    Sensing,
    Security,
    EffectiveChannel,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ber => "ber",
            Self::Ambiguity => "ambiguity",
            Self::Papr => "papr",
            Self::Sensing => "sensing",
            Self::Security => "security",
            Self::EffectiveChannel => "effective-channel",
        }
    }

    /// Whether the run depends on the channel profile being resolvable by AFDM.
    fn needs_orthogonality(self) -> bool {
        matches!(self, Self::Ber | Self::Sensing | Self::EffectiveChannel)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    /// Not part of the fingerprint: moving the results does not change them.
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "all_waveforms")]
    pub waveforms: Vec<Waveform>,
    pub system: SystemSection,
    pub channel: ChannelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ber: Option<BerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambiguity: Option<AmbiguitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub papr: Option<PaprSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensing: Option<SensingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub security: Option<SecuritySection>,
}

fn all_waveforms() -> Vec<Waveform> {
    Waveform::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n: usize,
    #[serde(default = "default_order")]
    pub modulation_order: usize,
    /// AFDM Doppler guard `ξ`.
    #[serde(default = "default_xi")]
    pub xi: usize,
    /// Defaults to the optimum for the channel profile.
    #[serde(default)]
    pub c1: Option<f64>,
    /// Defaults to `1/(2πN)`.
    #[serde(default)]
    pub c2: Option<f64>,
    #[serde(default)]
    pub otfs_doppler_bins: Option<usize>,
    #[serde(default)]
    pub otfs_delay_bins: Option<usize>,
}

fn default_order() -> usize {
    4
}

fn default_xi() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub l_max: usize,
    pub alpha_max: usize,
    pub paths: usize,
    #[serde(default)]
    pub fractional: bool,
    #[serde(default)]
    pub fading: Fading,
    #[serde(default = "default_carrier")]
    pub carrier_hz: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
}

fn default_carrier() -> f64 {
    DEFAULT_CARRIER_HZ
}

fn default_bandwidth() -> f64 {
    DEFAULT_BANDWIDTH_HZ
}

impl ChannelSection {
    pub fn profile(&self) -> ChannelProfile {
        ChannelProfile {
            l_max: self.l_max,
            alpha_max: self.alpha_max,
            paths: self.paths,
            fractional: self.fractional,
            fading: self.fading,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BerSection {
    #[serde(default = "default_snr_grid")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_max_trials")]
    pub max_trials: usize,
    #[serde(default = "default_target_errors")]
    pub target_errors: u64,
    #[serde(default)]
    pub min_bits: u64,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_equalizer")]
    pub equalizer: EqualizerKind,
    /// `[lo, hi]` dB window for the diversity-slope fit in the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_window_db: Option<[f64; 2]>,
}

impl Default for BerSection {
    fn default() -> Self {
        Self {
            snr_db: default_snr_grid(),
            max_trials: default_max_trials(),
            target_errors: default_target_errors(),
            min_bits: 0,
            batch: default_batch(),
            equalizer: default_equalizer(),
            slope_window_db: None,
        }
    }
}

fn default_snr_grid() -> Vec<f64> {
    (0..=6).map(|k| 5.0 * k as f64).collect()
}

fn default_max_trials() -> usize {
    2000
}

fn default_target_errors() -> u64 {
    500
}

fn default_batch() -> usize {
    64
}

fn default_equalizer() -> EqualizerKind {
    EqualizerKind::Lmmse
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbiguitySection {
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default = "default_payload")]
    pub payload: SensingPayload,
}

impl Default for AmbiguitySection {
    fn default() -> Self {
        Self { oversample: default_oversample(), payload: default_payload() }
    }
}

fn default_oversample() -> usize {
    2
}

fn default_payload() -> SensingPayload {
    SensingPayload::Unit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaprSection {
    #[serde(default = "default_papr_trials")]
    pub trials: usize,
    #[serde(default = "default_thresholds")]
    pub thresholds_db: Vec<f64>,
}

impl Default for PaprSection {
    fn default() -> Self {
        Self { trials: default_papr_trials(), thresholds_db: default_thresholds() }
    }
}

fn default_papr_trials() -> usize {
    10_000
}

fn default_thresholds() -> Vec<f64> {
    (0..=48).map(|k| 0.25 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSection {
    #[serde(default = "default_sensing_trials")]
    pub trials: usize,
    /// Omit for a noise-free run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default = "default_pilot_amplitude")]
    pub pilot_amplitude: f64,
}

impl Default for SensingSection {
    fn default() -> Self {
        Self { trials: default_sensing_trials(), snr_db: None, pilot_amplitude: default_pilot_amplitude() }
    }
}

fn default_sensing_trials() -> usize {
    100
}

fn default_pilot_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecuritySection {
    /// Receiver `c1` offsets; defaults to `[0, 1/(2N)]`.
    #[serde(default)]
    pub delta_c1: Option<Vec<f64>>,
    #[serde(default = "default_security_snr")]
    pub snr_db: f64,
    #[serde(default = "default_security_trials")]
    pub trials: usize,
}

impl Default for SecuritySection {
    fn default() -> Self {
        Self { delta_c1: None, snr_db: default_security_snr(), trials: default_security_trials() }
    }
}

fn default_security_snr() -> f64 {
    30.0
}

fn default_security_trials() -> usize {
    1000
}

/// A parsed file with every default filled in, ready to run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub afdm: Option<AfdmConfig>,
    pub fingerprint: String,
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
}

fn config_err(field: &str, reason: impl fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

impl ExperimentConfig {
    /// Fills defaults, checks the tables against the experiment kind and
    /// builds the AFDM parameters.
    pub fn resolve(mut self) -> Result<Resolved, CliError> {
        let kind = self.experiment;
        let stray: Vec<&str> = [
            ("ber", self.ber.is_some(), ExperimentKind::Ber),
            ("ambiguity", self.ambiguity.is_some(), ExperimentKind::Ambiguity),
            ("papr", self.papr.is_some(), ExperimentKind::Papr),
            ("sensing", self.sensing.is_some(), ExperimentKind::Sensing),
            ("security", self.security.is_some(), ExperimentKind::Security),
        ]
        .into_iter()
        .filter(|&(_, present, k)| present && k != kind)
        .map(|(name, _, _)| name)
        .collect();
        if !stray.is_empty() {
            return Err(config_err(&format!("[{}]", stray.join("], [")), format!("does not apply to experiment `{kind}`")));
        }
        match kind {
            ExperimentKind::Ber => self.ber = Some(self.ber.unwrap_or_default()),
            ExperimentKind::Ambiguity => self.ambiguity = Some(self.ambiguity.unwrap_or_default()),
            ExperimentKind::Papr => self.papr = Some(self.papr.unwrap_or_default()),
            ExperimentKind::Sensing => self.sensing = Some(self.sensing.unwrap_or_default()),
            ExperimentKind::Security => self.security = Some(self.security.unwrap_or_default()),
            ExperimentKind::EffectiveChannel => {}
        }
        if matches!(kind, ExperimentKind::Sensing | ExperimentKind::Security) {
            if self.waveforms != all_waveforms() && self.waveforms != [Waveform::Afdm] {
                return Err(config_err("waveforms", format!("experiment `{kind}` is AFDM-only")));
            }
            self.waveforms = vec![Waveform::Afdm];
        }
        if self.waveforms.is_empty() {
            return Err(config_err("waveforms", "at least one waveform is required"));
        }
        let mut seen = Vec::new();
        for w in &self.waveforms {
            if seen.contains(w) {
                return Err(config_err("waveforms", format!("`{}` listed twice", w.name())));
            }
            seen.push(*w);
        }

        let sys = &mut self.system;
        let ch = &self.channel;
        if sys.n < 2 {
            return Err(config_err("system.n", "must be at least 2"));
        }
        if ch.l_max >= sys.n {
            return Err(config_err("channel.l_max", format!("must be below N = {}", sys.n)));
        }
        if ch.paths == 0 {
            return Err(config_err("channel.paths", "must be positive"));
        }
        if !(ch.carrier_hz > 0.0 && ch.carrier_hz.is_finite()) {
            return Err(config_err("channel.carrier_hz", "must be positive"));
        }
        if !(ch.bandwidth_hz > 0.0 && ch.bandwidth_hz.is_finite()) {
            return Err(config_err("channel.bandwidth_hz", "must be positive"));
        }
        let c2 = *sys.c2.get_or_insert(1.0 / (2.0 * PI * sys.n as f64));

        let uses_afdm = self.waveforms.contains(&Waveform::Afdm);
        let afdm = if uses_afdm {
            let c1 = match sys.c1 {
                Some(c1) => c1,
                None => c1_optimal(sys.n, ch.alpha_max, sys.xi, Some(ch.l_max)).map_err(lift)?,
            };
            sys.c1 = Some(c1);
            let chirp = ChirpParams::new(c1, c2).map_err(lift)?;
            let cfg = AfdmConfig::new(sys.n, chirp, sys.xi, ch.l_max).map_err(lift)?;
            if kind.needs_orthogonality() {
                let report = validate_orthogonality(&cfg, ch.l_max, ch.alpha_max);
                if !report.orthogonal {
                    return Err(CliError::Infeasible(orthogonality_message(&cfg, &report)));
                }
            }
            Some(cfg)
        } else {
            None
        };

        if self.waveforms.contains(&Waveform::Otfs) {
            let (k, l) = match (sys.otfs_doppler_bins, sys.otfs_delay_bins) {
                (Some(k), Some(l)) => (k, l),
                _ => {
                    return Err(config_err(
                        "system.otfs_doppler_bins",
                        "otfs_doppler_bins and otfs_delay_bins are required when otfs is listed",
                    ))
                }
            };
            let otfs = OtfsConfig::new(k, l).map_err(lift)?;
            otfs.check_frame_len(sys.n).map_err(lift)?;
        }
        afdm::waveform::SymbolMap::new(sys.modulation_order).map_err(lift)?;

        let resolved = Resolved { fingerprint: self.fingerprint(), config: self, afdm };
        match kind {
            ExperimentKind::Ber => {
                resolved.ber_config()?.validate().map_err(lift)?;
                if let Some([lo, hi]) = resolved.config.ber.as_ref().and_then(|b| b.slope_window_db) {
                    if !(lo < hi) {
                        return Err(config_err("ber.slope_window_db", "needs lo < hi"));
                    }
                }
            }
            ExperimentKind::Ambiguity => {
                let a = resolved.config.ambiguity.as_ref().expect("filled");
                if a.oversample == 0 {
                    return Err(config_err("ambiguity.oversample", "must be positive"));
                }
            }
            ExperimentKind::Papr => {
                let p = resolved.config.papr.as_ref().expect("filled");
                if p.trials == 0 {
                    return Err(config_err("papr.trials", "must be positive"));
                }
                if p.thresholds_db.is_empty() || p.thresholds_db.iter().any(|t| !t.is_finite()) {
                    return Err(config_err("papr.thresholds_db", "need at least one finite threshold"));
                }
            }
            ExperimentKind::Sensing => {
                let s = resolved.config.sensing.as_ref().expect("filled");
                if s.trials == 0 {
                    return Err(config_err("sensing.trials", "must be positive"));
                }
                if !(s.pilot_amplitude > 0.0 && s.pilot_amplitude.is_finite()) {
                    return Err(config_err("sensing.pilot_amplitude", "must be positive and finite"));
                }
                if s.snr_db.is_some_and(|v| !v.is_finite()) {
                    return Err(config_err("sensing.snr_db", "must be finite; omit it for a noise-free run"));
                }
            }
            ExperimentKind::Security => {
                let s = resolved.security_config()?;
                if s.trials == 0 {
                    return Err(config_err("security.trials", "must be positive"));
                }
                if s.offsets.is_empty() || s.offsets.iter().any(|d| !d.is_finite()) {
                    return Err(config_err("security.delta_c1", "need at least one finite offset"));
                }
                if !s.snr_db.is_finite() {
                    return Err(config_err("security.snr_db", "must be finite"));
                }
            }
            ExperimentKind::EffectiveChannel => {}
        }
        Ok(resolved)
    }

    /// SHA-256 of the canonical JSON form, without the output location.
    pub fn fingerprint(&self) -> String {
        fingerprint(&self.canonical_json())
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Maps library validation errors to exit classes.
pub fn lift(e: afdm::Error) -> CliError {
    match e {
        afdm::Error::Infeasible(m) => CliError::Infeasible(m),
        afdm::Error::InvalidParameter { name, reason } => CliError::Config(format!("{name}: {reason}")),
        other => CliError::Config(other.to_string()),
    }
}

pub fn orthogonality_message(cfg: &AfdmConfig, report: &afdm::waveform::OrthogonalityReport) -> String {
    let mut msg = format!(
        "AFDM c1 = {} does not separate the channel paths (2N·c1 = {})",
        cfg.chirp.c1(),
        cfg.delay_shift()
    );
    if !report.integer_shift {
        msg.push_str("; 2N·c1 is not an integer");
    }
    if !report.collisions.is_empty() {
        let shown: Vec<String> = report
            .collisions
            .iter()
            .take(8)
            .map(|((l1, a1), (l2, a2))| format!("(l={l1}, α={a1})~(l={l2}, α={a2})"))
            .collect();
        msg.push_str(&format!("; {} colliding tap pairs: {}", report.collisions.len(), shown.join(", ")));
        if report.collisions.len() > shown.len() {
            msg.push_str(", ...");
        }
    }
    msg
}

impl Resolved {
    pub fn kind(&self) -> ExperimentKind {
        self.config.experiment
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn afdm(&self) -> Result<AfdmConfig, CliError> {
        self.afdm.ok_or_else(|| config_err("waveforms", "this experiment needs afdm"))
    }

    pub fn modem(&self, w: Waveform) -> Result<Modem, CliError> {
        let sys = &self.config.system;
        let cp = self.config.channel.l_max;
        match w {
            Waveform::Ofdm => Modem::ofdm(sys.n, cp),
            Waveform::Ocdm => Modem::ocdm(sys.n, cp),
            Waveform::Afdm => Modem::afdm(self.afdm()?),
            Waveform::Otfs => {
                let k = sys.otfs_doppler_bins.unwrap_or(0);
                let l = sys.otfs_delay_bins.unwrap_or(0);
                Modem::otfs(OtfsConfig::new(k, l).map_err(lift)?, cp)
            }
        }
        .map_err(lift)
    }

    pub fn ber_config(&self) -> Result<BerConfig, CliError> {
        let c = &self.config;
        let b = c.ber.as_ref().ok_or_else(|| config_err("experiment", "not a ber run"))?;
        Ok(BerConfig {
            waveforms: c.waveforms.clone(),
            n: c.system.n,
            modulation_order: c.system.modulation_order,
            profile: c.channel.profile(),
            xi: c.system.xi,
            c1: c.system.c1,
            c2: c.system.c2.expect("resolved"),
            otfs_doppler_bins: c.system.otfs_doppler_bins.unwrap_or(0),
            otfs_delay_bins: c.system.otfs_delay_bins.unwrap_or(0),
            equalizer: b.equalizer,
            snr_db: b.snr_db.clone(),
            max_trials: b.max_trials,
            target_errors: b.target_errors,
            min_bits: b.min_bits,
            batch: b.batch,
            seed: c.seed,
        })
    }

    pub fn security_config(&self) -> Result<SecurityConfig, CliError> {
        let c = &self.config;
        let s = c.security.as_ref().ok_or_else(|| config_err("experiment", "not a security run"))?;
        let cfg = self.afdm()?;
        Ok(SecurityConfig {
            n: c.system.n,
            c1: cfg.chirp.c1(),
            c2: cfg.chirp.c2(),
            prefix_len: cfg.prefix_len,
            modulation_order: c.system.modulation_order,
            offsets: s.delta_c1.clone().unwrap_or_else(|| vec![0.0, 1.0 / (2 * c.system.n) as f64]),
            snr_db: s.snr_db,
            trials: s.trials,
            seed: c.seed,
        })
    }

    pub fn sensing_config(&self) -> Result<SensingConfig, CliError> {
        let c = &self.config;
        let s = c.sensing.as_ref().ok_or_else(|| config_err("experiment", "not a sensing run"))?;
        let cfg = self.afdm()?;
        Ok(SensingConfig {
            afdm: AfdmSetup {
                n: cfg.n,
                c1: cfg.chirp.c1(),
                c2: cfg.chirp.c2(),
                xi: cfg.guard,
                prefix_len: cfg.prefix_len,
            },
            profile: c.channel.profile(),
            pilot_amplitude: s.pilot_amplitude,
            snr_db: s.snr_db,
            trials: s.trials,
            seed: c.seed,
            carrier_hz: c.channel.carrier_hz,
            bandwidth_hz: c.channel.bandwidth_hz,
        })
    }
}
