"""Landmark-guided face inpainting toolkit.

Pipeline: predict 68 facial landmarks from a corrupted face, rasterize them
into a conditioning map, generate the missing region with a U-Net + dilated
residual + long-short term attention generator trained against a spectrally
normalized conditional PatchGAN, and composite so only hole pixels change.
"""

from .imaging import (
    CompletedImage,
    CorruptedImage,
    CoverageBucket,
    Image,
    LandmarkMap,
    LandmarkSet,
    Mask,
    apply_mask,
    composite,
    coverage_bucket,
    generate_block_mask,
    generate_center_mask,
    load_image,
    load_irregular_mask,
    load_landmarks,
    load_mask,
    render_landmark_map,
    save_image,
    save_landmarks,
    save_mask,
)
from .landmark_net import (
    BottleneckSpec,
    LandmarkNet,
    LandmarkNetConfig,
    build_landmark_net,
    landmark_loss,
    predict_landmarks,
)
from .generator import (
    GeneratorConfig,
    InpaintGenerator,
    build_generator,
    forward_generator,
)
from .discriminator import (
    DiscriminatorConfig,
    PatchDiscriminator,
    build_discriminator,
    discriminate,
)
from .spectral import spectral_normalize
from .features import IdentityExtractor, VggFeatureExtractor
from .losses import (
    GeneratorLossComponents,
    LossWeights,
    adversarial_d_loss,
    adversarial_g_loss,
    gram,
    perceptual_loss,
    pixel_loss,
    style_loss,
    total_generator_loss,
    tv_loss,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig, desk_profile, load_train_config
from .data import FaceDataset, Sample, load_face_dataset, synthetic_face_dataset
from .training import (
    InpaintTrainer,
    LandmarkTrainer,
    train_inpaint_module,
    train_landmark_module,
)
from .metrics import (
    EvalReport,
    GaussianStats,
    evaluate,
    feature_stats,
    fid,
    nme,
    psnr,
    ssim,
)
from .augmentation import (
    augment_epoch,
    augment_pair,
    augmentation_ablation,
    identity_augmenter,
    make_augmenter,
)
from .inference import InpaintPipeline

__version__ = "0.1.0"
