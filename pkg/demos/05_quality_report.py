"""Evaluation metrics and the report table.

PSNR/SSIM are computed directly; LPIPS and identity features come from
sidecar files produced by external networks, so the report treats them as
optional per-image columns and averages whatever is present.
"""

import numpy as np

from persview import MetricRow, aggregate_report, id_score, psnr, ssim

rng = np.random.default_rng(3)
reference = rng.uniform(size=(64, 64, 3))

rows = []
for name, noise in (("light_noise", 0.02), ("medium_noise", 0.06), ("heavy_noise", 0.15)):
    output = np.clip(reference + rng.normal(scale=noise, size=reference.shape), 0, 1)
    feat_ref = rng.normal(size=512)
    feat_out = feat_ref + rng.normal(scale=noise * 8, size=512)
    rows.append(MetricRow(
        name=name,
        psnr_db=psnr(output, reference),
        ssim=ssim(output, reference),
        lpips=None,  # would come from an external sidecar file
        id_score=id_score(feat_out, feat_ref),
    ))

report = aggregate_report(rows)
print(report.format_table())
print()
print("identity pair for reference:")
print(f"  psnr {psnr(reference, reference.copy())}, "
      f"ssim {ssim(reference, reference.copy()):.6f}")
