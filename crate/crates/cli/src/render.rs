use sketchprune::planner::{LayerAction, PruneReport};

/// Left-aligned columns separated by two spaces.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (cell, &w) in cells.zip(&widths) {
            s.push_str(cell);
            s.extend(std::iter::repeat_n(' ', w - cell.chars().count() + 2));
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(&mut headers.iter().copied());
    let rules: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&line(&mut rules.iter().map(String::as_str)));
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
    }
    out
}

/// `125.49M`-style rendering.
pub fn count(n: u64) -> String {
    let n = n as f64;
    if n >= 1e9 {
        format!("{:.2}B", n / 1e9)
    } else if n >= 1e6 {
        format!("{:.2}M", n / 1e6)
    } else if n >= 1e3 {
        format!("{:.2}K", n / 1e3)
    } else {
        format!("{n}")
    }
}

pub fn prune_report(report: &PruneReport) -> String {
    let rows: Vec<Vec<String>> = report
        .layers
        .iter()
        .filter(|l| l.action != LayerAction::Copy)
        .map(|l| {
            vec![
                l.layer.clone(),
                format!("{:?}", l.action).to_lowercase(),
                format!("{}→{}", l.c, l.c_tilde),
                format!("{}→{}", l.in_channels, l.in_channels_tilde),
                l.covariance_error_frobenius.map(|e| format!("{e:.3e}")).unwrap_or_default(),
                l.bound_epsilon.map(|e| format!("{e:.3e}")).unwrap_or_default(),
                match l.bound_satisfied {
                    Some(true) => "ok".into(),
                    Some(false) => "VIOLATED".into(),
                    None => String::new(),
                },
            ]
        })
        .collect();
    let t = &report.totals;
    let mut out = table(&["layer", "action", "filters", "inputs", "gram err (F)", "ε", "bound"], &rows);
    out.push_str(&format!(
        "\n{} {:?} α={}: FLOPs {} → {} (-{:.1}%), params {} → {} (-{:.1}%)\n",
        report.model,
        report.method,
        report.global_rate,
        count(t.flops_before),
        count(t.flops_after),
        t.pruning_rate_flops,
        count(t.params_before),
        count(t.params_after),
        t.pruning_rate_params,
    ));
    out.push_str(&format!(
        "{} layers reduced, {} batch-norms reset, {} fallbacks, certificates {}/{} hold, {:.2}s\n",
        t.layers_sketched,
        t.batchnorm_reset,
        t.fallbacks,
        t.certificates_checked - t.certificate_violations,
        t.certificates_checked,
        report.timing.elapsed_total,
    ));
    out
}
