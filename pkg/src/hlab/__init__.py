"""hlab: a policy-gradient laboratory for hindsight-conditional baselines,
counterfactual credit assignment, and exact-enumeration verification."""

__version__ = "0.1.0"
