from .model import (
    CounterfactualQuery,
    ExoVar,
    Scm,
    ScmVariable,
    ZeroProbabilityEvidence,
    counterfactual,
    scm_enumerate,
)
from .effects import (
    EffectCell,
    ate,
    cf_ite,
    cf_ite_variance,
    counterfactual_advantage,
    effect_table,
    ite,
)
from .examples import coin_scm, medical_scm
from .schema import load_scm, scm_from_dict
from .mdp_scm import (
    CF_VARIANTS,
    FvfReport,
    ScmMdp,
    fcvf_baseline_check,
    model_based_cf_pg,
)
