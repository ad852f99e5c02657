//! Run manifests, CSV/JSON writers, text tables and the `M`-constant ledger.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bound_algebra::HalfLine;
use crate::chain_models::BirthDeathFamily;
use crate::constants::{
    check_lyapunov_bd, k_birth_death, k_phi, m_bd_lipschitz, m_bounded, m_gamma, m_lipschitz_poisson, m_logsobolev,
    m_lyapunov, m_lyapunov_local, m_mminf_growth, m_mminf_lip, m_phi_sobolev, m_sharp, m_tc, m_w1i,
    orlicz_gauge_norm, KPhi, MConstant, NamedInput, Provenance, Route, YoungFn,
};
use crate::diffusion::{ou_lambda_quadratic, ou_sharp_m};
use crate::error::{Error, Result};
use crate::model_spec::Model;
use crate::observable::ObservableSpec;
use crate::simulation::{LdpReport, TailReport};
use crate::spectral::{
    asymptotic_variance, build_generator, carre_du_champ, lip_rho_norm, poisson_solve_explicit, schrodinger_top_eig,
    spectral_gap,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to regenerate an output: the full argument vector plus
/// descriptive metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, replayed verbatim by `mbern rerun`.
    pub args: Vec<String>,
    pub model: Option<serde_json::Value>,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, model: Option<serde_json::Value>, parameters: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            args,
            model,
            parameters,
            seed,
            tool_version: TOOL_VERSION.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }

    /// `<output>.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        output.with_file_name(name)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// CSV text from a header and rows of already formatted fields.
pub fn to_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Left-aligned fixed-width text table.
pub fn to_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

/// Shortest round-trip formatting.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub const TAIL_CSV_HEADER: [&str; 11] =
    ["model", "g", "route", "t", "r", "n_paths", "p_hat", "ci_low", "ci_high", "bound", "verdict"];

pub fn tail_report_rows(report: &TailReport) -> Vec<Vec<String>> {
    report
        .rows
        .iter()
        .map(|row| {
            vec![
                report.model.clone(),
                report.observable.clone(),
                row.bound_route.clone(),
                fmt_f64(row.t),
                fmt_f64(row.r),
                row.estimate.n_paths.to_string(),
                fmt_f64(row.estimate.p_hat),
                fmt_f64(row.estimate.ci_low),
                fmt_f64(row.estimate.ci_high),
                fmt_f64(row.bound),
                row.verdict.as_str().to_string(),
            ]
        })
        .collect()
}

pub fn tail_report_csv(report: &TailReport) -> Result<String> {
    to_csv(&TAIL_CSV_HEADER, &tail_report_rows(report))
}

/// JSON mirror of a tail report together with the constant it was checked
/// against.
pub fn tail_report_json(report: &TailReport, constant: Option<&MConstant>) -> Result<String> {
    #[derive(Serialize)]
    struct Mirror<'a> {
        report: &'a TailReport,
        constant: Option<&'a MConstant>,
    }
    Ok(serde_json::to_string_pretty(&Mirror { report, constant })?)
}

pub fn ldp_report_csv(report: &LdpReport) -> Result<String> {
    let limit = report.limit.map(fmt_f64).unwrap_or_default();
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            vec![
                fmt_f64(row.t),
                fmt_f64(report.r),
                row.estimate.n_paths.to_string(),
                fmt_f64(row.estimate.p_hat),
                row.rate.map(fmt_f64).unwrap_or_default(),
                fmt_f64(row.rate_low),
                fmt_f64(row.rate_high),
                limit.clone(),
            ]
        })
        .collect();
    to_csv(&["t", "r", "n_paths", "p_hat", "rate", "rate_low", "rate_high", "limit"], &rows)
}

// ---------------------------------------------------------------------------
// Ledger

/// One route of the ledger: a value, or the constants it still needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub route: String,
    pub constant: Option<MConstant>,
    pub needs: Vec<String>,
    pub notes: Vec<String>,
}

impl LedgerEntry {
    fn computed(constant: MConstant, notes: Vec<String>) -> Self {
        Self { route: constant.route.name().to_string(), constant: Some(constant), needs: vec![], notes }
    }

    fn needs(route: Route, needs: &[&str], notes: Vec<String>) -> Self {
        Self { route: route.name().to_string(), constant: None, needs: needs.iter().map(|s| s.to_string()).collect(), notes }
    }

    pub fn value(&self) -> Option<f64> {
        self.constant.as_ref().map(|c| c.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsLedger {
    pub model: String,
    pub observable: String,
    pub c_p: Option<NamedInput>,
    pub sigma2: Option<NamedInput>,
    pub entries: Vec<LedgerEntry>,
}

impl ConstantsLedger {
    pub fn entry(&self, route: Route) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.route == route.name())
    }

    /// Smallest computed `M`.
    pub fn best(&self) -> Option<&MConstant> {
        self.entries.iter().filter_map(|e| e.constant.as_ref()).min_by(|a, b| a.value.total_cmp(&b.value))
    }

    pub fn table_rows(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|e| {
                let (m, inputs, prov) = match &e.constant {
                    Some(c) => {
                        let inputs = c
                            .inputs
                            .iter()
                            .map(|(k, v)| format!("{k}={}", fmt_f64(v.value)))
                            .collect::<Vec<_>>()
                            .join(" ");
                        let mut provs: Vec<String> =
                            c.inputs.values().map(|v| v.provenance.to_string()).collect();
                        provs.sort();
                        provs.dedup();
                        (fmt_f64(c.value), inputs, provs.join("+"))
                    }
                    None => ("-".into(), format!("needs: {}", e.needs.join(", ")), "-".into()),
                };
                vec![e.route.clone(), m, inputs, prov, e.notes.join("; ")]
            })
            .collect()
    }

    pub const HEADER: [&'static str; 5] = ["route", "M", "inputs", "provenance", "notes"];

    pub fn to_table(&self) -> String {
        let mut out = format!("model: {}\nobservable: {}\n", self.model, self.observable);
        if let Some(c) = &self.c_p {
            out.push_str(&format!("c_P: {} ({})\n", fmt_f64(c.value), c.provenance));
        }
        if let Some(s) = &self.sigma2 {
            out.push_str(&format!("sigma2: {} ({})\n", fmt_f64(s.value), s.provenance));
        }
        out.push('\n');
        out.push_str(&to_table(&Self::HEADER, &self.table_rows()));
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        to_csv(&Self::HEADER, &self.table_rows())
    }
}

/// Input names understood by the ledger.
pub const LEDGER_INPUTS: [&str; 12] =
    ["c_p", "c_ls", "c_p_phi", "kappa_c", "c_g", "kappa", "delta", "mu_g_star", "alpha_inv", "k_phi_g_plus", "b", "m"];

fn get(inputs: &BTreeMap<String, f64>, key: &str) -> Option<f64> {
    inputs.get(key).copied()
}

fn computed(m: MConstant, names: &[&str]) -> MConstant {
    names.iter().fold(m, |m, n| m.with_provenance(n, Provenance::Computed))
}

/// `Σ_{k≤n} 1/√(k+1)`.
pub fn sqrt_harmonic_rho(n_max: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (0..=n_max)
        .map(|k| {
            acc += 1.0 / ((k + 1) as f64).sqrt();
            acc
        })
        .collect()
}

/// Every route for the model and observable: computed where the inputs allow,
/// otherwise listing what is missing. The observable is centered under the
/// model's invariant law first.
pub fn build_ledger(model: &Model, g_spec: &ObservableSpec, inputs: &BTreeMap<String, f64>) -> Result<ConstantsLedger> {
    if let Some(bad) = inputs.keys().find(|k| !LEDGER_INPUTS.contains(&k.as_str())) {
        return Err(Error::Spec(format!("unknown ledger input '{bad}' (known: {})", LEDGER_INPUTS.join(", "))));
    }
    let raw = g_spec.build();
    let g = model.center(&raw)?;
    let label = g.label();
    match model {
        Model::BirthDeath { spec, measure } => {
            let n = measure.truncation;
            let gen = build_generator(spec, n)?;
            let values = g.values(n);
            let (c_p, c_p_prov) = match get(inputs, "c_p") {
                Some(v) => (v, Provenance::Input),
                None => (spectral_gap(&gen)?.c_p, Provenance::Computed),
            };
            let sigma2 = asymptotic_variance(&gen, &g)?;
            let g_plus_sup = values.iter().fold(0.0f64, |m, v| m.max(*v));
            let mut entries = Vec::new();
            let lambda = match spec.family {
                BirthDeathFamily::MmInfinity { lambda } => Some(lambda),
                _ => None,
            };
            let probe_note = format!("finite probe over 0..={n}");

            // sharp value for affine g on M/M/∞
            if let (Some(_), Some(c)) = (lambda, g_spec.polynomial_coeffs()) {
                if c.len() <= 2 && c.get(1).copied().unwrap_or(0.0) >= 0.0 {
                    let slope = c.get(1).copied().unwrap_or(0.0);
                    entries.push(LedgerEntry::computed(m_sharp(slope)?, vec!["optimal constant for affine g".into()]));
                }
            }

            entries.push(if g_spec.is_bounded_above() {
                LedgerEntry::computed(
                    computed(m_bounded(c_p, g_plus_sup)?, &["sup_g_plus"]).with_provenance("c_P", c_p_prov),
                    vec![probe_note.clone()],
                )
            } else {
                LedgerEntry::needs(Route::Bounded, &["sup g+ < inf"], vec!["clip the observable, e.g. min:K:n".into()])
            });

            // geometric Lyapunov pair U = κⁿ with φ₀(n) = (n + δ)/2 on M/M/∞
            let mut lyap: Option<(f64, f64, bool)> = None;
            if let Some(lambda) = lambda {
                let kappa = get(inputs, "kappa").unwrap_or(2.0);
                let delta = get(inputs, "delta").unwrap_or(1.0);
                let phi0 = move |k: usize| 0.5 * (k as f64 + delta);
                let n_from = ((2.0 * kappa * lambda + delta).ceil() as usize).min(n);
                let cert = check_lyapunov_bd(spec, phi0, kappa, n_from, n)?;
                if cert.pass && !cert.degenerate {
                    let phi: Vec<f64> = (0..=n).map(|k| cert.phi_scale * phi0(k)).collect();
                    let k = with_affine_limit(k_phi(&values, &phi)?, g_spec, 0.5 * cert.phi_scale);
                    lyap = Some((k.value, cert.b, k.at_probe_edge));
                    let mut notes = vec![format!("U=kappa^n, kappa={kappa}, phi0=(n+{delta})/2, N_from={n_from}")];
                    if k.at_probe_edge {
                        notes.push("K_phi attained at the probe edge".into());
                    }
                    entries.push(LedgerEntry::computed(
                        computed(m_lyapunov(k.value, cert.b, c_p)?, &["K_phi_g_plus", "b"]).with_provenance("c_P", c_p_prov),
                        notes,
                    ));
                } else {
                    entries.push(LedgerEntry::needs(
                        Route::Lyapunov,
                        &["K_phi_g_plus", "b"],
                        vec![format!("drift check failed for kappa={kappa}")],
                    ));
                }
            } else if let (Some(k), Some(b)) = (get(inputs, "k_phi_g_plus"), get(inputs, "b")) {
                lyap = Some((k, b, false));
                entries.push(LedgerEntry::computed(m_lyapunov(k, b, c_p)?.with_provenance("c_P", c_p_prov), vec![]));
            } else {
                let note = match spec.family {
                    BirthDeathFamily::Subgeometric { .. } => "no geometric drift for this family; see lyapunov_local",
                    _ => "supply k_phi_g_plus and b",
                };
                entries.push(LedgerEntry::needs(Route::Lyapunov, &["K_phi_g_plus", "b"], vec![note.into()]));
            }

            entries.push(match (get(inputs, "kappa_c"), lyap) {
                (Some(kc), Some((k, b, _))) => {
                    LedgerEntry::computed(computed(m_lyapunov_local(k, b, kc)?, &["K_phi_g_plus", "b"]), vec![])
                }
                (None, Some(_)) => LedgerEntry::needs(Route::LyapunovLocal, &["kappa_C"], vec![]),
                _ => LedgerEntry::needs(Route::LyapunovLocal, &["kappa_C", "K_phi_g_plus", "b"], vec![]),
            });

            if let Some(lambda) = lambda {
                let delta = get(inputs, "delta").unwrap_or(1.0);
                let phi: Vec<f64> = (0..=n).map(|k| k as f64 + delta).collect();
                let k = with_affine_limit(k_phi(&values, &phi)?, g_spec, 1.0);
                let mut notes = vec![format!("g <= K(n+{delta}) on the probe")];
                if k.at_probe_edge {
                    notes.push("K attained at the probe edge".into());
                }
                entries.push(LedgerEntry::computed(computed(m_mminf_growth(k.value, delta, lambda)?, &["K"]), notes));

                let rho: Vec<f64> = (0..=n).map(|k| k as f64).collect();
                let lip = lip_rho_norm(&values, &rho)?;
                entries.push(LedgerEntry::computed(computed(m_mminf_lip(lip, lambda)?, &["lip_g"]), vec![probe_note.clone()]));
            }

            // ρ(n) = Σ_{k≤n} 1/√(k+1)
            let rho = sqrt_harmonic_rho(n);
            let kbd = k_birth_death(spec, measure, &rho)?;
            let lip_rho = lip_rho_norm(&values, &rho)?;
            let mut notes = vec!["rho(n)=sum_{k<=n} (k+1)^(-1/2)".to_string()];
            if kbd.appears_to_diverge {
                notes.push("K attained near the truncation: may diverge with N".into());
            }
            entries.push(LedgerEntry::computed(
                computed(m_bd_lipschitz(c_p, kbd.k, lip_rho)?, &["K", "lip_rho_g"]).with_provenance("c_P", c_p_prov),
                notes,
            ));

            let big_g = poisson_solve_explicit(spec, measure, &g)?;
            let gamma_g = carre_du_champ(&gen, &big_g.values(n)).into_iter().fold(0.0, f64::max);
            entries.push(LedgerEntry::computed(
                computed(m_lipschitz_poisson(c_p, gamma_g)?, &["sup_gamma_G"]).with_provenance("c_P", c_p_prov),
                vec![probe_note.clone()],
            ));

            entries.push(match get(inputs, "c_p_phi") {
                Some(cpp) => {
                    let psi = YoungFn::Power(2.0).conjugate();
                    let g_plus: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
                    let norm = orlicz_gauge_norm(&psi, &g_plus, &measure.weights)?.value;
                    LedgerEntry::computed(computed(m_phi_sobolev(norm, cpp)?, &["N_Psi_g_plus"]), vec!["Phi(x)=x^2".into()])
                }
                None => LedgerEntry::needs(Route::PhiSobolev, &["c_P_Phi"], vec!["Phi(x)=x^2".into()]),
            });

            let ls_note = if lambda.is_some() { vec!["no log-Sobolev inequality for this chain".to_string()] } else { vec![] };
            match get(inputs, "c_ls") {
                Some(c_ls) => {
                    let gamma_g = carre_du_champ(&gen, &values).into_iter().fold(0.0, f64::max);
                    entries.push(LedgerEntry::computed(
                        computed(m_gamma(c_p, c_ls, gamma_g)?, &["sup_gamma_g"]).with_provenance("c_P", c_p_prov),
                        vec![probe_note.clone()],
                    ));
                    let lam = |l: f64| schrodinger_top_eig(&gen, &g, l).unwrap_or(f64::INFINITY);
                    entries.push(LedgerEntry::computed(
                        m_logsobolev(c_p, c_ls, lam, HalfLine::Unbounded)?.with_provenance("c_P", c_p_prov),
                        vec!["Lambda from the truncated Schrodinger operator".into()],
                    ));
                }
                None => {
                    entries.push(LedgerEntry::needs(Route::Gamma, &["c_LS"], ls_note.clone()));
                    entries.push(LedgerEntry::needs(Route::Logsobolev, &["c_LS"], ls_note));
                }
            }

            let rho_id: Vec<f64> = (0..=n).map(|k| k as f64).collect();
            entries.push(match get(inputs, "c_g") {
                Some(c_g) => LedgerEntry::computed(
                    computed(m_w1i(lip_rho_norm(&values, &rho_id)?, c_p, c_g)?, &["lip_g"]).with_provenance("c_P", c_p_prov),
                    vec!["d(x,y)=|x-y|".into()],
                ),
                None => LedgerEntry::needs(Route::W1i, &["c_G"], vec![]),
            });
            entries.push(tc_entry(inputs, c_p)?);

            Ok(ConstantsLedger {
                model: model.label(),
                observable: label,
                c_p: Some(NamedInput { value: c_p, provenance: c_p_prov }),
                sigma2: Some(NamedInput { value: sigma2, provenance: Provenance::Computed }),
                entries,
            })
        }
        Model::Ou(ou) => {
            let theta = ou.theta;
            let coeffs = g_spec.polynomial_coeffs();
            let degree = coeffs.map(|c| c.iter().rposition(|&v| v != 0.0).unwrap_or(0));
            let c1 = coeffs.and_then(|c| c.get(1).copied()).unwrap_or(0.0);
            let c2 = coeffs.and_then(|c| c.get(2).copied()).unwrap_or(0.0);
            let sigma2 = match degree {
                Some(d) if d <= 2 => Some(2.0 * theta * theta * c1 * c1 + 2.0 * theta.powi(3) * c2 * c2),
                _ => None,
            };
            let mut entries = Vec::new();
            let pure_quadratic = degree == Some(2) && c1 == 0.0 && c2 > 0.0;
            if pure_quadratic {
                entries.push(LedgerEntry::computed(m_sharp(ou_sharp_m(theta) * c2)?, vec!["optimal constant".into()]));
            } else if degree.is_some_and(|d| d <= 1) {
                entries.push(LedgerEntry::computed(m_sharp(0.0)?, vec!["Gaussian time average".into()]));
            }

            entries.push(if g_spec.is_bounded_above() {
                let sup = match g_spec {
                    ObservableSpec::Clamp { upper, .. } => (upper - model.mean(&raw)?).max(0.0),
                    _ => g.eval(0.0).max(0.0),
                };
                LedgerEntry::computed(m_bounded(theta, sup)?.with_provenance("c_P", Provenance::Analytic), vec![])
            } else {
                LedgerEntry::needs(Route::Bounded, &["sup g+ < inf"], vec!["clip the observable".into()])
            });

            entries.push(match degree {
                Some(d) if d <= 1 => LedgerEntry::computed(
                    m_gamma(theta, theta, c1 * c1)?
                        .with_provenance("c_P", Provenance::Analytic)
                        .with_provenance("c_LS", Provenance::Analytic)
                        .with_provenance("sup_gamma_g", Provenance::Analytic),
                    vec![],
                ),
                _ => LedgerEntry {
                    route: Route::Gamma.name().into(),
                    constant: None,
                    needs: vec!["sup Gamma(g) < inf".into()],
                    notes: vec!["Gamma(g)=|g'|^2 is unbounded for this g".into()],
                },
            });

            let logsob = if pure_quadratic {
                let pole = 1.0 / (4.0 * theta * theta * c2);
                Some(m_logsobolev(theta, theta, move |l| ou_lambda_quadratic(l * c2, theta), HalfLine::Open(pole))?)
            } else if degree.is_some_and(|d| d <= 1) {
                Some(m_logsobolev(theta, theta, move |l| theta * theta * c1 * c1 * l * l, HalfLine::Unbounded)?)
            } else {
                None
            };
            entries.push(match logsob {
                Some(m) => LedgerEntry::computed(
                    m.with_provenance("c_P", Provenance::Analytic).with_provenance("c_LS", Provenance::Analytic),
                    vec!["closed-form Lambda".into()],
                ),
                None => LedgerEntry::needs(Route::Logsobolev, &["closed-form Lambda(lambda g)"], vec![]),
            });
            entries.push(match get(inputs, "c_p_phi") {
                Some(_) => LedgerEntry::needs(Route::PhiSobolev, &["N_Psi(g+) on R"], vec![]),
                None => LedgerEntry::needs(Route::PhiSobolev, &["c_P_Phi"], vec![]),
            });
            entries.push(LedgerEntry::needs(Route::LyapunovLocal, &["kappa_C", "K_phi_g_plus", "b"], vec![]));
            entries.push(match (get(inputs, "c_g"), degree) {
                (Some(c_g), Some(d)) if d <= 1 => LedgerEntry::computed(
                    m_w1i(c1.abs(), theta, c_g)?.with_provenance("c_P", Provenance::Analytic),
                    vec![],
                ),
                _ => LedgerEntry::needs(Route::W1i, &["c_G", "Lipschitz g"], vec![]),
            });
            entries.push(tc_entry(inputs, theta)?);
            Ok(ConstantsLedger {
                model: model.label(),
                observable: label,
                c_p: Some(NamedInput { value: theta, provenance: Provenance::Analytic }),
                sigma2: sigma2.map(|v| NamedInput { value: v, provenance: Provenance::Analytic }),
                entries,
            })
        }
        Model::Potential(_) => {
            let c_p = get(inputs, "c_p");
            let mut entries = Vec::new();
            entries.push(match (c_p, g_spec) {
                (Some(c), ObservableSpec::Clamp { upper, .. }) => {
                    LedgerEntry::computed(m_bounded(c, (upper - model.mean(&raw)?).max(0.0))?, vec![])
                }
                (None, _) => LedgerEntry::needs(Route::Bounded, &["c_P", "sup g+ < inf"], vec![]),
                _ => LedgerEntry::needs(Route::Bounded, &["sup g+ < inf"], vec![]),
            });
            entries.push(LedgerEntry::needs(Route::Logsobolev, &["c_P", "c_LS", "Lambda(lambda g)"], vec![]));
            entries.push(match (get(inputs, "kappa_c"), get(inputs, "k_phi_g_plus"), get(inputs, "b")) {
                (Some(kc), Some(k), Some(b)) => LedgerEntry::computed(m_lyapunov_local(k, b, kc)?, vec![]),
                _ => LedgerEntry::needs(
                    Route::LyapunovLocal,
                    &["kappa_C", "K_phi_g_plus", "b"],
                    vec!["grid certificates give phi and b".into()],
                ),
            });
            Ok(ConstantsLedger {
                model: model.label(),
                observable: label,
                c_p: c_p.map(|v| NamedInput { value: v, provenance: Provenance::Input }),
                sigma2: None,
                entries,
            })
        }
    }
}

/// For affine `g = c₀ + c₁n` and `φ` with slope `phi_slope` at infinity, the
/// supremum of `g⁺/φ` over `ℕ` is at least the limit `c₁/phi_slope`, which a
/// finite probe only approaches.
fn with_affine_limit(k: KPhi, g_spec: &ObservableSpec, phi_slope: f64) -> KPhi {
    match g_spec.polynomial_coeffs() {
        Some(c) if c.len() <= 2 && k.at_probe_edge => {
            let limit = c.get(1).copied().unwrap_or(0.0).max(0.0) / phi_slope;
            KPhi { value: k.value.max(limit), abs_value: k.abs_value.max(limit), at_probe_edge: false }
        }
        _ => k,
    }
}

fn tc_entry(inputs: &BTreeMap<String, f64>, c_p: f64) -> Result<LedgerEntry> {
    Ok(match (get(inputs, "mu_g_star"), get(inputs, "alpha_inv")) {
        (Some(mu), Some(ai)) => LedgerEntry::computed(m_tc(mu, c_p, ai)?, vec![]),
        _ => LedgerEntry::needs(Route::Tc, &["mu(g*)", "alpha^-1(1/c_P)"], vec![]),
    })
}

/// Parse `key=value` pairs (comma or whitespace separated).
pub fn parse_inputs(items: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in items.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| Error::Spec(format!("input '{item}' is not key=value")))?;
        let value: f64 = v.trim().parse().map_err(|e| Error::Spec(format!("input '{item}': {e}")))?;
        out.insert(k.trim().to_ascii_lowercase(), value);
    }
    Ok(out)
}
