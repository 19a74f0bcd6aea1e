//! Readers and writers for every file a command consumes or produces.
//!
//! Tables are CSV with a header row. Reports are `key = value` text. Floats
//! print in Rust's shortest round-trip form unless noted, so outputs are
//! byte-stable across platforms.

use std::fmt::Write as _;

use dynlens_core::controllers::LensCommandRecord;
use dynlens_core::gaze::{Breakeven, ConflictEstimate, BREAKEVEN_TOLERANCE_D};
use dynlens_core::observer::ObserverState;
use dynlens_core::optics::{CalibrationSample, FitSpace, LensCalibration};
use dynlens_core::psychophysics::{
    Comparison, ExperimentResult, ItemTest, PsychometricFit, QuestionnaireRecord, TrialRecord, WilcoxonMethod,
    WilcoxonResult,
};
use dynlens_core::stimuli::{GrayImage, StimulusMeta};
use dynlens_core::Result as CoreResult;

use crate::error::{CliError, CliResult};

/// Fixed-point with `decimals` places and no negative zero.
pub fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

fn csv_bytes<F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>>(f: F) -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        f(&mut w).expect("writing csv to memory");
        w.flush().expect("flushing csv to memory");
    }
    String::from_utf8(buf).expect("csv output is utf-8")
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

// Calibration

/// Two numbers per line (current in mA, distance in m) separated by
/// whitespace or a comma. `#` starts a comment. A first line
/// `current_mA,distance_m` is accepted as a header.
pub fn parse_calibration_samples(text: &str) -> CliResult<Vec<CalibrationSample>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if out.is_empty() && fields == ["current_mA", "distance_m"] {
            continue;
        }
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed.as_deref() {
            Some(&[current_ma, distance_m]) => out.push(CalibrationSample { current_ma, distance_m }),
            _ => return Err(CliError::config(format!("line {}: expected 'current_mA distance_m', got '{line}'", n + 1))),
        }
    }
    Ok(out)
}

fn space_name(s: FitSpace) -> &'static str {
    match s {
        FitSpace::Meters => "meters",
        FitSpace::Diopters => "diopters",
    }
}

pub fn calibration_report(cal: &LensCalibration) -> String {
    let unit = match cal.space {
        FitSpace::Meters => "m",
        FitSpace::Diopters => "D",
    };
    let mut s = String::new();
    writeln!(s, "fit_space = {}", space_name(cal.space)).unwrap();
    writeln!(s, "model = y_{unit} = slope * current_mA + intercept").unwrap();
    writeln!(s, "slope = {}", cal.slope).unwrap();
    writeln!(s, "intercept = {}", cal.intercept).unwrap();
    writeln!(s, "samples = {}", cal.samples.len()).unwrap();
    for (i, smp) in cal.samples.iter().enumerate() {
        writeln!(s, "sample_{i} = {} mA, {} m", smp.current_ma, smp.distance_m).unwrap();
    }
    let rms = (cal.residuals.iter().map(|r| r * r).sum::<f64>() / cal.residuals.len() as f64).sqrt();
    writeln!(s, "rms_residual_{unit} = {}", fixed(rms, 9)).unwrap();
    writeln!(s, "valid_current_min_mA = {}", cal.valid_current_range.0).unwrap();
    writeln!(s, "valid_current_max_mA = {}", cal.valid_current_range.1).unwrap();
    writeln!(s, "settle_time_ms = {}", cal.settle_time_ms).unwrap();
    s
}

/// Residuals are observed minus fitted in the fit space, 9 decimals.
pub fn calibration_csv(cal: &LensCalibration) -> String {
    csv_bytes(|w| {
        w.write_record(["current_mA", "distance_m", "fitted", "residual"])?;
        for (smp, r) in cal.samples.iter().zip(&cal.residuals) {
            w.write_record([
                smp.current_ma.to_string(),
                smp.distance_m.to_string(),
                fixed(cal.fitted(smp.current_ma), 9),
                fixed(*r, 9),
            ])?;
        }
        Ok(())
    })
}

// Images

/// Binary 8-bit PGM.
pub fn pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn parse_pgm(bytes: &[u8]) -> CliResult<GrayImage> {
    let bad = || CliError::config("not a binary 8-bit PGM");
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(bad());
        }
        fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| bad())?.to_string());
    }
    i += 1;
    let num = |s: &str| s.parse::<u32>().map_err(|_| bad());
    if fields[0] != "P5" || num(&fields[3])? != 255 {
        return Err(bad());
    }
    let (width, height) = (num(&fields[1])?, num(&fields[2])?);
    let pixels = bytes.get(i..).ok_or_else(bad)?.to_vec();
    if pixels.len() != (width * height) as usize {
        return Err(bad());
    }
    Ok(GrayImage { width, height, pixels })
}

pub fn sidecar(meta: &StimulusMeta) -> String {
    let mut s = String::new();
    writeln!(s, "kind = {}", meta.kind.as_str()).unwrap();
    writeln!(s, "seed = {}", meta.seed).unwrap();
    writeln!(s, "time_s = {}", meta.time_s).unwrap();
    writeln!(s, "pixel_subtense_arcmin = {}", meta.pixel_subtense_arcmin).unwrap();
    for (k, v) in &meta.params {
        writeln!(s, "{k} = {v}").unwrap();
    }
    for e in &meta.elements {
        writeln!(
            s,
            "element.{} = x_px {}, y_px {}, disparity_arcmin {}, visible {}",
            e.label, e.x_px, e.y_px, e.disparity_arcmin, e.visible
        )
        .unwrap();
    }
    for (i, w) in meta.warnings.iter().enumerate() {
        writeln!(s, "warning_{i} = {w}").unwrap();
    }
    s
}

// Experiments

pub const TRIAL_HEADER: [&str; 8] = ["trial", "condition", "level", "response", "correct", "rt_s", "timed_out", "seed"];

pub fn trials_csv(trials: &[TrialRecord]) -> String {
    csv_bytes(|w| {
        w.write_record(TRIAL_HEADER)?;
        for t in trials {
            w.write_record([
                t.trial.to_string(),
                t.condition.clone(),
                t.level.to_string(),
                t.response.to_string(),
                t.correct.to_string(),
                t.rt_s.to_string(),
                t.timed_out.to_string(),
                t.seed.to_string(),
            ])?;
        }
        Ok(())
    })
}

fn read_csv(text: &str) -> CliResult<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| CliError::config(e.to_string()))?.clone();
    let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(|e| CliError::config(e.to_string()))?;
    Ok((header, rows))
}

fn column(header: &csv::StringRecord, name: &str) -> CliResult<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| CliError::config(format!("missing column '{name}'")))
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, name: &str) -> CliResult<T> {
    let raw = row.get(i).unwrap_or("");
    let line = row.position().map(|p| p.line()).unwrap_or(0);
    raw.parse().map_err(|_| CliError::config(format!("line {line}: cannot parse {name} '{raw}'")))
}

/// Trial logs in the format [`trials_csv`] writes. Columns may appear in any
/// order; `trial`, `rt_s`, `timed_out`, `response` and `seed` are optional.
pub fn parse_trials(text: &str) -> CliResult<Vec<TrialRecord>> {
    let (h, rows) = read_csv(text)?;
    let (cond, level, correct) = (column(&h, "condition")?, column(&h, "level")?, column(&h, "correct")?);
    let optional = |n: &str| h.iter().position(|c| c == n);
    let (trial, resp, rt, to, seed) =
        (optional("trial"), optional("response"), optional("rt_s"), optional("timed_out"), optional("seed"));
    let mut out = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let correct = match r.get(correct).unwrap_or("") {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(CliError::config(format!("row {}: correct must be true/false/1/0, got '{other}'", i + 1))),
        };
        out.push(TrialRecord {
            trial: match trial {
                Some(c) => field(r, c, "trial")?,
                None => i as u32,
            },
            condition: r.get(cond).unwrap_or("").to_string(),
            level: field(r, level, "level")?,
            response: resp.map(|c| field(r, c, "response")).transpose()?.unwrap_or(0),
            correct,
            rt_s: rt.map(|c| field(r, c, "rt_s")).transpose()?.unwrap_or(0.0),
            timed_out: to.map(|c| field(r, c, "timed_out")).transpose()?.unwrap_or(false),
            seed: seed.map(|c| field(r, c, "seed")).transpose()?.unwrap_or(0),
        });
    }
    Ok(out)
}

/// Paired values from the first two numeric columns named `baseline` and
/// `treatment`.
pub fn parse_pairs(text: &str) -> CliResult<Vec<(f64, f64)>> {
    let (h, rows) = read_csv(text)?;
    let (a, b) = (column(&h, "baseline")?, column(&h, "treatment")?);
    rows.iter().map(|r| Ok((field(r, a, "baseline")?, field(r, b, "treatment")?))).collect()
}

pub fn parse_questionnaire(text: &str) -> CliResult<Vec<QuestionnaireRecord>> {
    let (h, rows) = read_csv(text)?;
    let (s, se, it, ra) = (column(&h, "subject")?, column(&h, "session")?, column(&h, "item")?, column(&h, "rating")?);
    rows.iter()
        .map(|r| {
            Ok(QuestionnaireRecord {
                subject: field(r, s, "subject")?,
                session: r.get(se).unwrap_or("").to_string(),
                item: r.get(it).unwrap_or("").to_string(),
                rating: field(r, ra, "rating")?,
            })
        })
        .collect()
}

fn fit_cells(fit: &CoreResult<PsychometricFit>) -> [String; 8] {
    match fit {
        Ok(f) => [
            f.threshold.to_string(),
            opt(f.ci.map(|c| c.0)),
            opt(f.ci.map(|c| c.1)),
            f.mu.to_string(),
            f.sigma.to_string(),
            f.lapse.to_string(),
            f.n_trials.to_string(),
            f.extrapolated.to_string(),
        ],
        Err(_) => Default::default(),
    }
}

fn error_text<T>(r: &CoreResult<T>) -> String {
    r.as_ref().err().map(|e| e.to_string()).unwrap_or_default()
}

/// Threshold table: one row per subject and cell, then one pooled row per
/// cell.
pub fn summary_csv(res: &ExperimentResult) -> String {
    csv_bytes(|w| {
        w.write_record([
            "cell",
            "depth_D",
            "row",
            "subject",
            "threshold",
            "ci_low",
            "ci_high",
            "mu",
            "sigma",
            "lapse",
            "n_trials",
            "extrapolated",
            "excluded",
            "demand_L_D",
            "demand_R_D",
            "fuse_time_s",
            "error",
        ])?;
        for cell in &res.cells {
            for run in &res.subjects {
                let Some(f) = run.fits.iter().find(|f| f.cell == cell.cell) else { continue };
                let mut rec = vec![cell.cell.clone(), opt(cell.depth_d), "subject".into(), run.subject.to_string()];
                rec.extend(fit_cells(&f.fit));
                rec.push(run.excluded.to_string());
                rec.push(f.demand_left.0.to_string());
                rec.push(f.demand_right.0.to_string());
                rec.push(match f.fuse_time {
                    Some(t) => t.seconds().map(|s| s.to_string()).unwrap_or_else(|| "unfused".into()),
                    None => String::new(),
                });
                rec.push(error_text(&f.fit));
                w.write_record(&rec)?;
            }
        }
        for cell in &res.cells {
            let demands = res.subjects.iter().flat_map(|r| r.fits.iter()).find(|f| f.cell == cell.cell);
            let mut rec = vec![cell.cell.clone(), opt(cell.depth_d), "pooled".into(), cell.n_subjects.to_string()];
            rec.extend(fit_cells(&cell.pooled));
            rec.push(String::new());
            rec.push(opt(demands.map(|f| f.demand_left.0)));
            rec.push(opt(demands.map(|f| f.demand_right.0)));
            rec.push(String::new());
            rec.push(error_text(&cell.pooled));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

fn wilcoxon_cells(r: &CoreResult<WilcoxonResult>) -> [String; 3] {
    match r {
        Ok(w) => [
            w.w_plus.to_string(),
            w.p.to_string(),
            match w.method {
                WilcoxonMethod::Exact => "exact".into(),
                WilcoxonMethod::Normal => "normal".into(),
            },
        ],
        Err(_) => Default::default(),
    }
}

pub fn comparisons_csv(cmp: &[Comparison]) -> String {
    csv_bytes(|w| {
        w.write_record(["baseline", "treatment", "n_pairs", "n_lower", "w_plus", "p_one_tailed", "p_two_tailed", "method", "error"])?;
        for c in cmp {
            let one = wilcoxon_cells(&c.one_tailed);
            let two = wilcoxon_cells(&c.two_tailed);
            w.write_record([
                c.baseline.clone(),
                c.treatment.clone(),
                c.n_pairs.to_string(),
                c.n_lower.to_string(),
                one[0].clone(),
                one[1].clone(),
                two[1].clone(),
                one[2].clone(),
                error_text(&c.one_tailed),
            ])?;
        }
        Ok(())
    })
}

/// Human-readable digest of an experiment.
pub fn experiment_report(res: &ExperimentResult) -> String {
    let mut s = String::new();
    writeln!(s, "protocol = {}", res.protocol).unwrap();
    writeln!(s, "subjects = {}", res.subjects.len()).unwrap();
    writeln!(s, "excluded = {}", res.subjects.iter().filter(|r| r.excluded).count()).unwrap();
    for c in &res.cells {
        match &c.pooled {
            Ok(f) => {
                write!(s, "pooled.{} = threshold {}", c.cell, f.threshold).unwrap();
                if let Some((lo, hi)) = f.ci {
                    write!(s, ", ci95 [{lo}, {hi}]").unwrap();
                }
                writeln!(s).unwrap();
            }
            Err(e) => writeln!(s, "pooled.{} = fit failed ({e})", c.cell).unwrap(),
        }
    }
    for c in &res.comparisons {
        let p = |r: &CoreResult<WilcoxonResult>| r.as_ref().map(|w| w.p.to_string()).unwrap_or_else(|e| e.to_string());
        writeln!(
            s,
            "wilcoxon.{}_vs_{} = {} of {} lower, one-tailed p {}, two-tailed p {}",
            c.baseline,
            c.treatment,
            c.n_lower,
            c.n_pairs,
            p(&c.one_tailed),
            p(&c.two_tailed)
        )
        .unwrap();
    }
    s
}

pub fn lens_log_csv(rows: &[LensCommandRecord]) -> String {
    csv_bytes(|w| {
        w.write_record(["t_ms", "eye", "current_mA", "demand_D"])?;
        for r in rows {
            w.write_record([r.t_ms.to_string(), r.eye.as_str().to_string(), r.current_ma.to_string(), r.demand.0.to_string()])?;
        }
        Ok(())
    })
}

pub fn trajectory_csv(states: &[ObserverState]) -> String {
    csv_bytes(|w| {
        w.write_record(["t_s", "A_D", "V_D", "defocus_L", "defocus_R", "fused"])?;
        for s in states {
            w.write_record([
                s.t_s.to_string(),
                s.accommodation.to_string(),
                s.vergence.to_string(),
                s.defocus_left.to_string(),
                s.defocus_right.to_string(),
                s.fused.to_string(),
            ])?;
        }
        Ok(())
    })
}

// Gaze simulation

/// The `se` column is the standard error of the dynamic-lens mean.
pub fn sweep_csv(rows: &[(f64, ConflictEstimate)]) -> String {
    csv_bytes(|w| {
        w.write_record(["f", "mean_fixed_D", "mean_dynamic_D", "se"])?;
        for (f, e) in rows {
            w.write_record([f.to_string(), e.mean_fixed.to_string(), e.mean_dynamic.to_string(), e.se_dynamic.to_string()])?;
        }
        Ok(())
    })
}

pub fn breakeven_report(b: &Breakeven, anchor: f64) -> String {
    let mut s = String::new();
    writeln!(s, "tolerance_D = {BREAKEVEN_TOLERANCE_D}").unwrap();
    match b {
        Breakeven::Found { f_star, bracket, difference } => {
            writeln!(s, "result = found").unwrap();
            writeln!(s, "f_star = {f_star}").unwrap();
            writeln!(s, "bracket_low = {}", bracket.0).unwrap();
            writeln!(s, "bracket_high = {}", bracket.1).unwrap();
            writeln!(s, "dynamic_minus_fixed_D = {difference}").unwrap();
        }
        Breakeven::None { difference_at_one } => {
            writeln!(s, "result = none").unwrap();
            writeln!(s, "dynamic_minus_fixed_at_f1_D = {difference_at_one}").unwrap();
        }
    }
    writeln!(s, "reference_f_star = {anchor}").unwrap();
    writeln!(s, "reference_note = published estimate of roughly 1/3, depends on scene and miss model, not a bound").unwrap();
    s
}

// Statistics

pub fn wilcoxon_report(n_pairs: usize, n_lower: usize, one: &WilcoxonResult, two: &WilcoxonResult) -> String {
    let method = |w: &WilcoxonResult| match w.method {
        WilcoxonMethod::Exact => "exact",
        WilcoxonMethod::Normal => "normal",
    };
    let mut s = String::new();
    writeln!(s, "pairs = {n_pairs}").unwrap();
    writeln!(s, "nonzero_differences = {}", one.n).unwrap();
    writeln!(s, "treatment_lower = {n_lower}").unwrap();
    writeln!(s, "w_plus = {}", one.w_plus).unwrap();
    writeln!(s, "method = {}", method(one)).unwrap();
    writeln!(s, "p_one_tailed = {}", one.p).unwrap();
    writeln!(s, "p_two_tailed = {}", two.p).unwrap();
    s
}

pub fn fit_report(fits: &[(String, PsychometricFit)]) -> String {
    csv_bytes(|w| {
        w.write_record(["condition", "threshold", "ci_low", "ci_high", "mu", "sigma", "lapse", "n_trials", "extrapolated"])?;
        for (c, f) in fits {
            let mut rec = vec![c.clone()];
            rec.extend(fit_cells(&Ok(f.clone())));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn item_tests_csv(tests: &[ItemTest]) -> String {
    csv_bytes(|w| {
        w.write_record(["item", "n_pairs", "mean_a", "mean_b", "w_plus", "p_two_tailed", "method", "error"])?;
        for t in tests {
            let c = wilcoxon_cells(&t.test);
            w.write_record([
                t.item.clone(),
                t.n_pairs.to_string(),
                t.mean_a.to_string(),
                t.mean_b.to_string(),
                c[0].clone(),
                c[1].clone(),
                c[2].clone(),
                error_text(&t.test),
            ])?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_drops_negative_zero() {
        assert_eq!(fixed(-1e-17, 9), "0.000000000");
        assert_eq!(fixed(-0.5, 1), "-0.5");
    }

    #[test]
    fn sample_parser() {
        let s = parse_calibration_samples("current_mA,distance_m\n# bench\n175\t1.5\n200, 1.84 # note\n\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1], CalibrationSample { current_ma: 200.0, distance_m: 1.84 });
        assert!(parse_calibration_samples("175 1.5 2\n").is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let img = GrayImage { width: 3, height: 2, pixels: vec![0, 10, 32, 255, 9, 13] };
        assert_eq!(parse_pgm(&pgm(&img)).unwrap(), img);
    }

    #[test]
    fn trials_round_trip() {
        let t = vec![TrialRecord {
            trial: 3,
            condition: "dynamic".into(),
            level: 0.8,
            response: 2,
            correct: true,
            rt_s: 1.25,
            timed_out: false,
            seed: u64::MAX,
        }];
        assert_eq!(parse_trials(&trials_csv(&t)).unwrap(), t);
    }
}
