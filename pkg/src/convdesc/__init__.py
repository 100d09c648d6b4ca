"""convdesc: hand-crafted image descriptors over CNN convolutional maps.

An image is run through the front of a VGG-16 network to the 2nd
max-pooling layer (56x56x128 maps), dense SIFT + bag-of-words or HLAC
features are extracted from the maps, and a linear SVM classifies the
result; the same descriptors on plain grayscale input serve as the
baseline.
"""

from .backbone import (ConvMapSet, PreprocessConfig, WeightStore,
                       forward_to_pool2, grayscale_map_set, load_weights,
                       preprocess_image)
from .bow import Codebook, encode_bow, train_codebook
from .errors import (ConfigurationError, ConvdescError, FormatError,
                     IntegrityError, InvalidArgumentError)
from .features import FeatureVector
from .harness import (DatasetManifest, EvalReport, PipelineConfig, SplitSpec,
                      compare_reports, run_experiment, scan_dataset, split)
from .hlac import BinaryMap, binarize, enumerate_masks, hlac25, hlac_concat, otsu_threshold
from .sift import DenseGridParams, SiftDescriptor, dense_sift, gradient_field
from .svm import SvmModel, fit_scaler, predict, train_binary, train_multiclass
from .tensor import FilterBank, Tensor, conv2d, maxpool2, relu

__version__ = "0.1.0"
