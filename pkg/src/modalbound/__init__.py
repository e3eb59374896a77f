"""Multi-modal composite learning: modality masking, ERM, latent quality and bounds."""

from .bounds import (BoundConstants, BoundReport, LinearClass, MlpClass, RademacherEstimate,
                     ZeroClass, bound_check, estimate_constants, rademacher_linear_exact,
                     rademacher_mc_oracle, theorem1_components, theorem1_rhs,
                     theorem2_components, theorem2_rhs)
from .composite import (FusionOp, LinearComposite, MlpComposite, ModelSpec, encode, fuse,
                        load_model, predict, save_model)
from .exceptions import (BoundConstantsError, InvalidConfigError, InvalidInputError,
                         MissingModalityError, ModalboundError, SchemaMismatchError,
                         SingularityError, TrainingDivergedError)
from .harness import ExperimentSpec, ResultTable, emit, run
from .latent_quality import (CovarianceBlocks, EtaEstimate, covariance_blocks, eta_closed_form,
                             eta_empirical, gamma, optimal_head, schur_complement)
from .modal_data import (Dataset, ModalitySchema, ModalitySubset, MultiModalSample,
                         compose_subsets, load_dataset, project, save_dataset, to_masked_vector)
from .synthgen import (LinearGenConfig, OverlapConfig, generate_linear, generate_overlap,
                       random_orthonormal, random_spd)
from .training import (ERMResult, TrainConfig, empirical_risk, erm_linear_closed_form, erm_train,
                       finetune_head, two_stage_train)

__version__ = "0.1.0"
