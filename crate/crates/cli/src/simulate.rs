use crate::error::Result;
use crate::run::format_float;
use crrr::simulate::{gen_data, oracle_ranks, DgpSpec};

/// Draws a design and renders it as CSV with columns `y, w`, the
/// covariates, and optionally the oracle conditional and marginal ranks.
pub fn simulate_csv(spec: &DgpSpec, with_oracle: bool) -> Result<String> {
    let data = gen_data(spec)?;
    let oracle = with_oracle.then(|| oracle_ranks(spec, &data)).transpose()?;
    let names = data.covariate_names().to_vec();
    let covariates: Vec<Vec<f64>> = names.iter().map(|n| data.covariate(n).unwrap_or_default()).collect();

    let mut header = vec!["y".to_string(), "w".to_string()];
    header.extend(names.iter().cloned());
    if oracle.is_some() {
        header.extend(["u_oracle", "v_oracle", "u_marg_oracle", "v_marg_oracle"].map(String::from));
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..data.len() {
        let mut row = vec![format_float(data.y()[i]), format_float(data.w()[i])];
        row.extend(covariates.iter().map(|c| format_float(c[i])));
        if let Some(o) = &oracle {
            row.extend([&o.u, &o.v, &o.u_marg, &o.v_marg].map(|r| format_float(r.values[i])));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}
