//! File-name conventions. Names double as join keys between stages.

/// `3` -> `3`, `2.5` -> `2.5`, `-5` -> `-5`.
pub fn format_target(db: f64) -> String {
    if db.fract() == 0.0 {
        format!("{}", db as i64)
    } else {
        format!("{db}")
    }
}

/// `<stem>_snr<k>`
pub fn noisy_stem(clean_stem: &str, target_db: f64) -> String {
    format!("{clean_stem}_snr{}", format_target(target_db))
}

/// Splits `<stem>_snr<k>` into the clean stem and the target.
pub fn parse_noisy_stem(stem: &str) -> Option<(&str, f64)> {
    let (clean, k) = stem.rsplit_once("_snr")?;
    if clean.is_empty() {
        return None;
    }
    Some((clean, k.parse().ok()?))
}

/// `<noisy stem>__<algorithm>__<variant>`
pub fn denoised_stem(noisy: &str, algorithm: &str, variant: &str) -> String {
    format!("{noisy}__{algorithm}__{variant}")
}

pub fn parse_denoised_stem(stem: &str) -> Option<(&str, &str, &str)> {
    let mut parts = stem.rsplitn(3, "__");
    let variant = parts.next()?;
    let algorithm = parts.next()?;
    let noisy = parts.next()?;
    if [noisy, algorithm, variant].iter().any(|p| p.is_empty()) {
        return None;
    }
    Some((noisy, algorithm, variant))
}
