"""Exact rational solution of the clamped biquartic problem on the 2x2 mesh
of (-1,1)^2 with Adini elements, independent of the Rust code.

Prints the stiffness entries, the load vector, the solution and the squared
broken energy error as exact fractions.
"""
import sympy as sp

x, y = sp.symbols("x y")
mons = [1, x, y, x**2, x*y, y**2, x**3, x**2*y, x*y**2, y**3, x**3*y, x*y**3]


def basis(x0, x1, y0, y1):
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    rows = []
    for cx, cy in corners:
        for op in (lambda m: m, lambda m: sp.diff(m, x), lambda m: sp.diff(m, y)):
            rows.append([sp.sympify(op(m)).subs({x: cx, y: cy}) for m in mons])
    inv = sp.Matrix(rows).inv()
    return corners, [sum(inv[k, i] * mons[k] for k in range(12)) for i in range(12)]


u = -(x**4 - 2*x**2 + 1) * (y**4 - 2*y**2 + 1)
f = sp.expand(sp.diff(u, x, 4) + 2*sp.diff(u, x, 2, y, 2) + sp.diff(u, y, 4))
hess = lambda w: (sp.diff(w, x, 2), sp.diff(w, x, y), sp.diff(w, y, 2))

# global unknowns: value, d_x, d_y at the centre vertex
K = sp.zeros(3, 3)
b = sp.zeros(3, 1)
quads = [(-1, 0, -1, 0), (0, 1, -1, 0), (0, 1, 0, 1), (-1, 0, 0, 1)]
local = []
for q in quads:
    corners, phi = basis(*q)
    c = corners.index((0, 0))
    funcs = [phi[3*c + a] for a in range(3)]
    local.append((q, funcs))
    integ = lambda g: sp.integrate(g, (x, q[0], q[1]), (y, q[2], q[3]))
    for i in range(3):
        b[i] += integ(f * funcs[i])
        hi = hess(funcs[i])
        for j in range(3):
            hj = hess(funcs[j])
            K[i, j] += integ(hi[0]*hj[0] + 2*hi[1]*hj[1] + hi[2]*hj[2])
sol = K.LUsolve(b)
err2 = 0
for q, funcs in local:
    uh = sum(sol[i] * funcs[i] for i in range(3))
    e = hess(u - uh)
    err2 += sp.integrate(e[0]**2 + 2*e[1]**2 + e[2]**2, (x, q[0], q[1]), (y, q[2], q[3]))
print("K00", K[0, 0])
print("b", list(b))
print("solution", list(sol))
print("err2", sp.nsimplify(err2), sp.N(sp.sqrt(err2), 17))
