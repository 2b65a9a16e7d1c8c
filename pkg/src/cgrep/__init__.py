"""Radiomics + fractal texture features, resampled REP classification and
copula-based survival analysis under dependent censoring."""

from .errors import CgrepError, DataFormatError, FitError
from .extractor import RadiomicsExtractor
from .fractal import FractalMap, gmbm_map, mbm_map, ptpsa_map
from .io import (FeatureTable, RegionMask, StudyConfig, VoxelGrid,
                 load_feature_table, load_mask, load_volume,
                 write_feature_table, write_mask, write_volume)
from .learners import (ClassificationMetrics, DecisionTreeClassifier,
                       GradientBoostedClassifier, classification_metrics)
from .prognosis import (CrossTab, PrognosticGrouping, compute_pi, cross_tab,
                        curve_distance, group_comparison, permutation_pvalue,
                        split_by_pi)
from .resampling import (MetricDistribution, RankingReport, ResamplingPlan,
                         evaluate_model, rank_features, significance_filter,
                         threshold_select)
from .simulate import (SimDataset, SimSpec, simulate_classification,
                       simulate_dependent, simulate_phantom)
from .survival import (AlphaSelection, CoxEstimate, DependentCoxEstimate,
                       StepSurvivalCurve, SurvivalRecord, cg_curve, clayton,
                       cox_univariate, dependent_cox, harrell_c, kaplan_meier,
                       select_alpha, select_features_dependent, tau_of_alpha)
from .texture import (QuantizedRegion, extract_conventional, glzsm_features,
                      gtsdm_features, histogram_features, ngtdm_features,
                      quantize, shape_features)
from .fractal import extract_fractal

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
