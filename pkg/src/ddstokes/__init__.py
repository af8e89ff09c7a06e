"""ddstokes: differential-difference modules of a rational pair (f,g) on P^1.

Submodules:
    exact      -- Gaussian-rational scalars
    laurent    -- Laurent polynomials in q, module linear algebra
    geometry   -- divisors, critical points, spectral sheets, goodness
    derham     -- de Rham lattices, operator matrices, residue pairings
    qstokes    -- circle model of Stokes filtered quasi-local systems
    specfun    -- independent gamma / cylindrical-function oracles
    paths      -- steepest-descent path continuation
    periods    -- period integrals, intersection pairings, asymptotic fits
    cli        -- command-line front end
"""

__version__ = "0.1.0"
