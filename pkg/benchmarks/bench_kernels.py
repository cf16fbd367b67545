"""Compare the compiled and the numpy element kernels.

Times every kernel on the element data of one mesh and reports the best of
``--repeat`` runs per backend, plus the largest relative difference between
the two results.

    python benchmarks/bench_kernels.py --level 5 --k 1 3
"""
import argparse
import timeit

import numpy as np

from biotfem import kernels
from biotfem.assemble import ElementData, quadrature_degrees
from biotfem.mesh import unit_square
from biotfem.space import build_system


def kernel_calls(k, level):
    sys = build_system(unit_square(level), k)
    q = quadrature_degrees(k)
    eu = ElementData(sys.uspace, q["a"])
    eb = ElementData(sys.uspace, q["b"])
    pb = ElementData(sys.pspace, q["b"])
    pk = ElementData(sys.pspace, q["k"])
    rng = np.random.default_rng(0)
    vals = np.ascontiguousarray(rng.standard_normal(pk.w.shape))
    coef = np.ascontiguousarray(rng.standard_normal(sys.uspace.dofmap.shape))
    return sys.mesh.n_triangles, [
        ("elasticity_local", (eu.G, eu.w, 1.0, 1.0)),
        ("coupling_local", (pb.phi, eb.G, eb.w, 1.0)),
        ("laplace_local", (pk.G, pk.w, 1.0)),
        ("mass_local", (pk.phi, pk.w)),
        ("load_local", (vals, pk.phi, pk.w)),
        ("values_at_quad", (coef, eu.phi)),
        ("gradients_at_quad", (coef, eu.G)),
    ]


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--level", type=int, default=5)
    parser.add_argument("--k", type=int, nargs="+", default=[1, 3])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    names = [n for n in ("cython", "python") if n in backends]
    header = f"{'k':>2} {'kernel':<18}" + "".join(f"{n + ' [ms]':>14}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>9}{'rel diff':>10}"
    for k in args.k:
        n_tri, calls = kernel_calls(k, args.level)
        print(f"\nlevel {args.level}, {n_tri} triangles, P{k + 1}/P{k}")
        print(header)
        for name, call_args in calls:
            times = [best_time(getattr(backends[n], name), call_args, args.repeat) for n in names]
            line = f"{k:>2} {name:<18}" + "".join(f"{1e3 * t:>14.2f}" for t in times)
            if len(names) == 2:
                a = getattr(backends["cython"], name)(*call_args)
                b = getattr(backends["python"], name)(*call_args)
                diff = np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)
                line += f"{times[1] / times[0]:>9.1f}{diff:>10.1e}"
            print(line)


if __name__ == "__main__":
    main()
