"""Encoder backends: pretrained CLIP/BERT/ResNet, or random-init stand-ins.

Both backends expose the same surface: one batched ``encode`` call from
(PIL images, raw texts) to the four native-width feature blocks. The
pretrained backend needs downloadable or locally cached weights; the
random-init backend builds the same architectures with seeded random
weights so the export pipeline can run and be tested fully offline (its
embeddings carry no semantics).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
import torch
from torchvision.models import resnet50
from torchvision.transforms import functional as TF

CLIP_MEAN = [0.48145466, 0.4578275, 0.40821073]
CLIP_STD = [0.26862954, 0.26130258, 0.27577711]
IMAGENET_MEAN = [0.485, 0.456, 0.406]
IMAGENET_STD = [0.229, 0.224, 0.225]

IMAGE_SIZE = 224
TEXT_LEN = 77

DEFAULT_CLIP = "openai/clip-vit-base-patch32"
DEFAULT_BERT = "bert-base-uncased"


@dataclass
class EncodedBatch:
    """Native-width outputs, one row per pair, before width normalization."""

    clip_image: np.ndarray  # B x clip_joint_dim
    clip_text: np.ndarray  # B x clip_joint_dim
    resnet_map: np.ndarray  # B x channels x H x W
    bert_tokens: np.ndarray  # B x TEXT_LEN x bert_dim


def _preprocess(images, mean, std) -> torch.Tensor:
    batch = []
    for img in images:
        t = TF.to_tensor(TF.resize(img.convert("RGB"), [IMAGE_SIZE, IMAGE_SIZE]))
        batch.append(TF.normalize(t, mean, std))
    return torch.stack(batch)


def _resnet_feature_map(backbone, pixel: torch.Tensor) -> torch.Tensor:
    x = backbone.conv1(pixel)
    x = backbone.bn1(x)
    x = backbone.relu(x)
    x = backbone.maxpool(x)
    x = backbone.layer1(x)
    x = backbone.layer2(x)
    x = backbone.layer3(x)
    return backbone.layer4(x)  # B x 2048 x 7 x 7 at 224 input


class PretrainedEncoders:
    """Real frozen encoders via transformers/torchvision pretrained weights."""

    def __init__(self, clip_ref: str = DEFAULT_CLIP, bert_ref: str = DEFAULT_BERT,
                 device: str = "cpu"):
        from transformers import AutoTokenizer, BertModel, CLIPModel
        from torchvision.models import ResNet50_Weights

        self.device = torch.device(device)
        self.clip = CLIPModel.from_pretrained(clip_ref).eval().to(self.device)
        self.clip_tokenizer = AutoTokenizer.from_pretrained(clip_ref)
        self.bert = BertModel.from_pretrained(bert_ref).eval().to(self.device)
        self.bert_tokenizer = AutoTokenizer.from_pretrained(bert_ref)
        self.resnet = resnet50(weights=ResNet50_Weights.IMAGENET1K_V2).eval().to(self.device)

    @torch.no_grad()
    def encode(self, images, texts) -> EncodedBatch:
        clip_pixels = _preprocess(images, CLIP_MEAN, CLIP_STD).to(self.device)
        resnet_pixels = _preprocess(images, IMAGENET_MEAN, IMAGENET_STD).to(self.device)
        clip_tok = self.clip_tokenizer(
            list(texts), padding="max_length", truncation=True, max_length=TEXT_LEN,
            return_tensors="pt",
        ).to(self.device)
        bert_tok = self.bert_tokenizer(
            list(texts), padding="max_length", truncation=True, max_length=TEXT_LEN,
            return_tensors="pt",
        ).to(self.device)
        clip_out = self.clip(
            pixel_values=clip_pixels, input_ids=clip_tok["input_ids"],
            attention_mask=clip_tok["attention_mask"],
        )
        return EncodedBatch(
            clip_image=clip_out.image_embeds.cpu().double().numpy(),
            clip_text=clip_out.text_embeds.cpu().double().numpy(),
            resnet_map=_resnet_feature_map(self.resnet, resnet_pixels)
            .cpu().double().numpy(),
            bert_tokens=self.bert(**bert_tok).last_hidden_state.cpu().double().numpy(),
        )


def _hash_ids(text: str, vocab: int, length: int) -> list[int]:
    # stable stand-in tokenization: words to hashed ids, zero-padded
    ids = [zlib.crc32(w.encode("utf-8")) % (vocab - 2) + 2 for w in text.split()]
    ids = ids[: length]
    return ids + [0] * (length - len(ids))


class RandomInitEncoders:
    """Same architectures with seeded random weights; offline stand-in.

    Outputs are deterministic functions of (seed, inputs) but carry no
    pretrained semantics, so alignment-style checks do not apply.
    """

    def __init__(self, seed: int = 0, device: str = "cpu"):
        from transformers import BertConfig, BertModel, CLIPConfig, CLIPModel

        self.device = torch.device(device)
        torch.manual_seed(seed)
        self.clip = CLIPModel(CLIPConfig()).eval().to(self.device)
        torch.manual_seed(seed + 1)
        self.bert = BertModel(BertConfig()).eval().to(self.device)
        torch.manual_seed(seed + 2)
        self.resnet = resnet50(weights=None).eval().to(self.device)
        self.clip_vocab = self.clip.config.text_config.vocab_size
        self.bert_vocab = self.bert.config.vocab_size

    @torch.no_grad()
    def encode(self, images, texts) -> EncodedBatch:
        clip_pixels = _preprocess(images, CLIP_MEAN, CLIP_STD).to(self.device)
        resnet_pixels = _preprocess(images, IMAGENET_MEAN, IMAGENET_STD).to(self.device)
        clip_ids = torch.tensor(
            [_hash_ids(t, self.clip_vocab, TEXT_LEN) for t in texts], device=self.device
        )
        bert_ids = torch.tensor(
            [_hash_ids(t, self.bert_vocab, TEXT_LEN) for t in texts], device=self.device
        )
        clip_out = self.clip(
            pixel_values=clip_pixels, input_ids=clip_ids,
            attention_mask=torch.ones_like(clip_ids),
        )
        return EncodedBatch(
            clip_image=clip_out.image_embeds.cpu().double().numpy(),
            clip_text=clip_out.text_embeds.cpu().double().numpy(),
            resnet_map=_resnet_feature_map(self.resnet, resnet_pixels)
            .cpu().double().numpy(),
            bert_tokens=self.bert(
                input_ids=bert_ids, attention_mask=torch.ones_like(bert_ids)
            ).last_hidden_state.cpu().double().numpy(),
        )


def pretrained_available(clip_ref: str = DEFAULT_CLIP) -> bool:
    """True when pretrained weights are loadable in this environment."""
    try:
        from transformers import AutoConfig

        AutoConfig.from_pretrained(clip_ref)
        return True
    except Exception:
        return False
