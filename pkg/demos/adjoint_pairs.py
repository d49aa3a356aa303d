"""Adjointness of the one-sided steppers and self-adjointness of rattle.

A method F* is the adjoint of F when composing F over +h with F* over -h
returns every admissible state exactly.  The two one-sided schemes are each
other's adjoints — stepping forward with one and backward with the other
cancels to machine precision — while the symmetric schemes invert
themselves.  The defects below are maxima over 50 randomly sampled
admissible states (position, momentum, and multiplier components all
included in the norm).
"""
from gni import gni_flat, model
from gni.analysis import adjoint_check, sample_admissible_states

H = 0.1


def main() -> None:
    for label, sys in [
        ("nonholonomic particle", model.nonholonomic_particle("harmonic")),
        ("planar system, affine constraint", model.constrained_2d(affine=(0.3, -0.2))),
    ]:
        print(f"{label} (h = {H}, 50 states)")

        def a_step(s, h):
            return gni_flat.euler_a_step(sys, s, h)

        def b_step(s, h):
            return gni_flat.euler_b_step(sys, s, h)

        def r_step(s, h):
            return gni_flat.rattle_step(sys, s, h)

        def c_step(s, h):
            return gni_flat.composed_euler_step(sys, s, h)

        states_a = sample_admissible_states(sys, 50, seed=7, h=H, scheme="euler_a")
        states_b = sample_admissible_states(sys, 50, seed=8, h=H, scheme="euler_b")
        states_plain = sample_admissible_states(sys, 50, seed=9, h=H)
        print(f"  B(-h) after A(+h): {adjoint_check(a_step, b_step, states_a, H):.3e}")
        print(f"  A(-h) after B(+h): {adjoint_check(b_step, a_step, states_b, H):.3e}")
        print(f"  rattle self-adjoint: {adjoint_check(r_step, r_step, states_plain, H):.3e}")
        print(f"  composition self-adjoint: {adjoint_check(c_step, c_step, states_plain, H):.3e}")
        print()


if __name__ == "__main__":
    main()
