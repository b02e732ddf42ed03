"""Selective inference for salient subgraphs of piecewise-linear GNNs."""

from .gnn import GCN, GIN, AffineTensor, GINLayer, Interval, ModelSpec, forward, forward_affine, argmax_class_interval
from .graphs import (CovarianceModel, FeatureMatrix, Graph,
                     SpatioTemporalLayout, build_spatiotemporal_graph,
                     load_graph, normalize_adjacency, save_graph, unvec)
from .inference import (LineParametrization, SearchConfig, TestResult,
                        TruncationSet, bonferroni_p, build_eta, naive_p,
                        parametric_search, run_test, selective_p,
                        test_statistic, wo_pp_p)
from .model_io import load_model, random_model, save_model
from .saliency import (SaliencyAffine, SaliencyMap, SubgraphSelection, cam,
                       grad, grad_cam, grad_input, gradcam_channel_weights,
                       input_gradient, line_saliency, select_subgraphs,
                       subgraph_interval_normalized, subgraph_interval_raw)
from .synthgen import (ExperimentConfig, NoiseFamily, calibrate_noise,
                       kronecker_cov, make_alternative_mu,
                       modified_real_generator, random_graph, sample_features,
                       trial_rng, wasserstein_to_gaussian)
from .experiments import (CampaignResult, TrialRecord, robustness_campaigns,
                          run_campaign, run_trial, tau_sweep,
                          write_records_csv)
