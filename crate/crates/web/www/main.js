import init, { perturb, projectors, debias_pairs } from "./pkg/svperturb_web.js";

const fmt = (x) => (typeof x === "number" ? (Math.abs(x) < 1e-3 && x !== 0 ? x.toExponential(3) : x.toFixed(4)) : String(x));
const list = (xs) => xs.slice(0, 8).map(fmt).join(", ") + (xs.length > 8 ? ", …" : "");

function fill(table, rows) {
  table.replaceChildren(
    ...rows.map(([label, value, bad]) => {
      const tr = document.createElement("tr");
      const th = document.createElement("th");
      const td = document.createElement("td");
      th.textContent = label;
      td.textContent = value;
      if (bad) td.className = "bad";
      tr.append(th, td);
      return tr;
    }),
  );
}

function bind(formId, run) {
  const form = document.getElementById(formId);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const v = Object.fromEntries(new FormData(form));
    const status = document.getElementById("status");
    status.textContent = "";
    try {
      run(v);
    } catch (err) {
      status.textContent = String(err);
    }
  });
}

await init();

bind("perturb-form", (v) => {
  const r = JSON.parse(perturb(+v.m, +v.n, v.spectrum, +v.tau, +v.k, +v.seed));
  fill(document.getElementById("perturb-out"), [
    ["singular values of A", list(r.signal_singular_values)],
    ["singular values of A + X", list(r.noisy_singular_values)],
    ["‖X‖ / gap", `${fmt(r.norm_gamma)} / ${fmt(r.gap)}`, !r.in_regime],
    ["‖P̃ − P‖ vs 4‖X‖/gap", `${fmt(r.deviation_norm)} ≤ ${fmt(r.deviation_bound)}`],
    ["‖L‖", fmt(r.linear_norm)],
    ["‖S‖ vs 14(‖X‖/gap)²", `${fmt(r.remainder_norm)} ≤ ${fmt(r.remainder_bound)}`],
    ["max eigenvalue shift vs ‖X‖", `${fmt(r.max_eigenvalue_shift)} ≤ ${fmt(r.norm_gamma)}`],
    ["in regime ‖X‖ < gap/2", r.in_regime ? "yes" : "no", !r.in_regime],
  ]);
});

bind("projector-form", (v) => {
  const r = JSON.parse(projectors(+v.m, +v.n, v.spectrum, +v.seed));
  fill(document.getElementById("projector-out"), [
    ["identity defect", fmt(r.invariant_defect)],
    ["zero eigenvalue multiplicity", String(r.zero_multiplicity)],
    ...r.clusters.map((c) => [
      `cluster ${c.k}: μ = ${fmt(c.mu)}, ν = ${c.multiplicity}, gap ${fmt(c.gap)}`,
      `contour vs eigenvectors ${fmt(c.contour_deviation)}`,
    ]),
  ]);
});

bind("debias-form", (v) => {
  const r = JSON.parse(debias_pairs(+v.n, +v.ratio, +v.pairs, +v.gamma, +v.seed));
  fill(document.getElementById("debias-out"), [
    ["pairs", String(r.pairs)],
    ["b from the run (mean ⟨θ̃, θ⟩² − 1)", fmt(r.b_in_run)],
    ["mean two-sample b̃", `${fmt(r.mean_b_tilde)} ± ${fmt(r.b_tilde_std_error)}`],
    ["mean ⟨θ̃ − θ, θ⟩", fmt(r.mean_naive_error)],
    ["mean ⟨θ̂ − θ, θ⟩", fmt(r.mean_debiased_error)],
    ["floor active", fmt(r.floor_active_fraction)],
  ]);
});
