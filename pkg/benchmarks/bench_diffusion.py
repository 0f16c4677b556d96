"""Benchmark the diffusion iteration: compiled kernel vs scipy fallback.

Builds one synthetic frame (a background wall plus ten foreground clusters,
15k points in view), assembles the graph once, then times the 200-iteration
diffusion with every available backend.

    python3 benchmarks/bench_diffusion.py [--points-side 125] [--repeats 5]
"""

import argparse
import time

import numpy as np

from lidarseg import (
    CameraCalibration,
    MaskInstance,
    MaskSet,
    PointCloud,
    assemble_normalized,
    build_knn_subgraph,
    build_pixel_subgraph,
    fov_indices,
    init_label_field,
    project_points,
)
from lidarseg import kernel


def build_frame(width, height, n_objects=10):
    focal = 50.0
    projection = np.array(
        [[focal, 0, width / 2, 0], [0, focal, height / 2, 0], [0, 0, 1.0, 0]]
    )
    calib = CameraCalibration(projection=projection, image_width=width, image_height=height)

    def backproject(u, v, depth):
        return np.stack(
            [(u - width / 2) * depth / focal, (v - height / 2) * depth / focal,
             np.broadcast_to(depth, u.shape)],
            axis=-1,
        )

    occupied = np.zeros((height, width), dtype=bool)
    chunks = []
    instances = []
    for i in range(n_objects):
        x0 = 4 + (i * 12) % (width - 12)
        y0 = 8 + (i * 7) % (height - 16)
        x1, y1 = x0 + 8, y0 + 8
        uu, vv = np.meshgrid(np.arange(x0, x1, dtype=float), np.arange(y0, y1, dtype=float))
        chunks.append(backproject(uu.ravel(), vv.ravel(), 5.0 + i))
        occupied[y0:y1, x0:x1] = True
        mask = np.zeros((height, width), dtype=bool)
        mask[y0:y1, x0:x1] = True
        instances.append(
            MaskInstance(instance_index=i + 1, class_id=1 + i % 3,
                         class_name=f"class{1 + i % 3}", mask=mask)
        )
    uu, vv = np.meshgrid(np.arange(width, dtype=float), np.arange(height, dtype=float))
    keep = ~occupied[vv.astype(int).ravel(), uu.astype(int).ravel()]
    chunks.append(backproject(uu.ravel()[keep], vv.ravel()[keep], 25.0))

    cloud = PointCloud(points=np.vstack(chunks))
    masks = MaskSet(width=width, height=height, instances=tuple(instances))
    return cloud, calib, masks


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points-side", type=int, default=125,
                        help="image width; height is fixed at 120")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--iterations", type=int, default=200)
    args = parser.parse_args()

    cloud, calib, masks = build_frame(args.points_side, 120)
    projected = project_points(cloud, calib)
    fov = fov_indices(projected)
    print(f"frame: {len(fov)} in-view points, {len(masks)} instances")

    t0 = time.perf_counter()
    knn = build_knn_subgraph(cloud.points[fov], k=10, sigma=1.0)
    t1 = time.perf_counter()
    pix = build_pixel_subgraph(projected, fov, masks.width, masks.height, 5, 0.001)
    graph = assemble_normalized(knn, pix)
    t2 = time.perf_counter()
    field = init_label_field(masks, n_points=len(fov))
    source = (graph.B @ field.z_pix).toarray()
    print(f"graph build: knn {t1 - t0:.3f}s, pixel+normalize {t2 - t1:.3f}s")
    print(f"A: {graph.A.nnz} nonzeros, B: {graph.B.nnz} nonzeros, "
          f"{field.z.shape[1]} label columns, {args.iterations} iterations")

    results = {}
    for name in sorted(kernel.BACKENDS):
        times = []
        for _ in range(args.repeats):
            start = time.perf_counter()
            z, iters, delta = kernel.csr_diffuse(
                graph.A, field.z, source, args.iterations, 0.0, backend=name
            )
            times.append(time.perf_counter() - start)
        results[name] = (min(times), z)
        print(f"{name:>10}: best {min(times):.3f}s over {args.repeats} runs "
              f"({args.iterations / min(times):.0f} iters/s)")

    if len(results) == 2:
        (a, za), (b, zb) = results["compiled"], results["scipy"]
        print(f"speedup compiled vs scipy: {b / a:.2f}x, "
              f"max value difference {np.abs(za - zb).max():.2e}")


if __name__ == "__main__":
    main()
