"""Independent high-precision oracle for the frozen test fixtures.

Uses mpmath's Jacobi theta functions (argument convention theta(pi*u, q),
q = exp(pi*i*tau)) and a direct multi-precision lattice sum for genus 2.
Run: python3 scripts/mp_fixtures.py
"""
import mpmath as mp

mp.mp.dps = 40
PI = mp.pi


def q_of(tau):
    return mp.exp(1j * PI * tau)


def th3(z, tau, d=0):
    return PI ** d * mp.jtheta(3, PI * z, q_of(tau), d)


def th1(u, tau, d=0):
    return PI ** d * mp.jtheta(1, PI * u, q_of(tau), d)


def dtau_th3(z, tau):
    return mp.diff(lambda t: th3(z, t), tau)


def p_rel(u, tau):
    return -mp.diff(lambda w: mp.log(th1(w, tau)), u, 2)


def p_prime_rel(u, tau):
    return -mp.diff(lambda w: mp.log(th1(w, tau)), u, 3)


def offset(tau):
    return -th1(0, tau, 3) / (6 * th1(0, tau, 1))


def theta_g2(z, tau, a=(0, 0), b=(0, 0), radius=12):
    s = mp.mpc(0)
    for n1 in range(-radius, radius + 1):
        for n2 in range(-radius, radius + 1):
            v = (n1 + a[0], n2 + a[1])
            quad = v[0] * (tau[0][0] * v[0] + tau[0][1] * v[1]) + v[1] * (tau[1][0] * v[0] + tau[1][1] * v[1])
            lin = v[0] * (z[0] + b[0]) + v[1] * (z[1] + b[1])
            s += mp.exp(1j * PI * quad + 2j * PI * lin)
    return s


def show(name, v):
    v = mp.mpc(v)
    print(f"{name}: re={mp.nstr(v.real, 20)} im={mp.nstr(v.imag, 20)}")


I = mp.mpc(0, 1)
show("theta(0, i)", th3(0, I))
show("theta(0, 10i) - 1", th3(0, 10 * I) - 1)
show("theta1'(0, i)", th1(0, I, 1))
show("p_rel(0.3, i)", p_rel(mp.mpf("0.3"), I))
show("p'_rel(0.3, i)", p_prime_rel(mp.mpf("0.3"), I))
z = mp.mpc("0.37", "0.21")
x, y = mp.mpf("0.1"), mp.mpf("0.45")
E = th1(y - x, I) / th1(0, I, 1)
show("szego(tau=i, z, 0.1, 0.45)", th3(z + y - x, I) / (th3(z, I) * E))
show("c0(z, i)", th3(z, I, 1) / th3(z, I))
show("c1(z, i)", th3(z, I, 2) / (2 * th3(z, I)) + offset(I))
show("dtau log theta(z, i)", dtau_th3(z, I) / th3(z, I))
for tau in [I, mp.mpf("0.5") + I, mp.mpc("0.2", "1.3"), mp.mpc("-0.3", "0.9"), mp.mpc(0, "1.5")]:
    show(f"offset(tau={mp.nstr(tau, 4)})", offset(tau))
tau2 = [[mp.mpc(0, 1), mp.mpf("0.5")], [mp.mpf("0.5"), mp.mpc(0, 2)]]
show("theta_g2((0.1+0.2i, -0.3+0.05i))", theta_g2((mp.mpc("0.1", "0.2"), mp.mpc("-0.3", "0.05")), tau2))
show("theta_g2 char [1/2,0;0,1/2]", theta_g2((mp.mpc("0.1", "0.2"), mp.mpc("-0.3", "0.05")), tau2, (0.5, 0), (0, 0.5)))
show("theta_g2 odd char [1/2,1/2;1/2,0] at z", theta_g2((mp.mpc("0.1", "0.2"), mp.mpc("-0.3", "0.05")), tau2, (0.5, 0.5), (0.5, 0)))
