use jmmd::data::bread;
use jmmd::glm::{wald_table, WaldScale};
use jmmd::selection::{candidate_pools, render_trace, select_joint, SelectionConfig};
use jmmd::terms::{MixtureOrder, NoiseOrder};

fn main() {
    let data = bread();
    let pools = candidate_pools(&data, MixtureOrder::SpecialCubic, NoiseOrder::Interaction).unwrap();
    let cfg = SelectionConfig::new(pools.mean, pools.disp);
    let t = std::time::Instant::now();
    let out = select_joint(&data, &cfg).unwrap();
    let elapsed = t.elapsed();
    print!("{}", render_trace(&out.trace));
    for row in wald_table(&out.joint.mean, &out.joint.mean_terms.names(), WaldScale::Pearson) {
        println!("{:<10} {:>12.5} {:>10.4} {:>10.3} {:>8.4}", row.term, row.estimate, row.std_error, row.t_value, row.p_value);
    }
    for row in wald_table(&out.joint.dispersion, &out.joint.disp_terms.names(), WaldScale::Pearson) {
        println!("{:<10} {:>12.5} {:>10.4} {:>10.3} {:>8.4}", row.term, row.estimate, row.std_error, row.t_value, row.p_value);
    }
    println!("elapsed {elapsed:?}");
}
