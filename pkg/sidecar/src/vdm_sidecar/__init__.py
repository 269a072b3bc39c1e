from .guidance import GRAD_MODES, GuidanceSession, csd_grad, sds_grad, se_sds_grad
from .model import StubDiffusionModel, add_noise, alpha_bar, default_omega, load_model
from .prompts import (EMBED_DIM, ENHANCED_WEIGHT, PromptSpec, blend_embeddings,
                      embed_tokens, empty_embedding, token_embedding)
from .protocol import (PROTOCOL_VERSION, ProtocolError, decode_frame, encode_frame,
                       read_frame)
from .server import handle_connection, serve_guidance

__version__ = "0.1.0"
