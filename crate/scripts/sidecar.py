#!/usr/bin/env python3
"""Local inference sidecar for the `sidecar` and `causal-sidecar` model kinds.

Wraps one Hugging Face checkpoint and answers JSON over HTTP. Requires torch and
transformers; nothing in the Rust test suite depends on it.

    python scripts/sidecar.py --model roberta-large --port 8765
    python scripts/sidecar.py --model roberta-large-mnli --task nli --port 8766
    python scripts/sidecar.py --model gpt2 --task causal --port 8767
"""

import argparse
import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from threading import Lock

import torch
from transformers import (
    AutoModelForCausalLM,
    AutoModelForMaskedLM,
    AutoModelForSequenceClassification,
    AutoTokenizer,
)


class Backend:
    def __init__(self, name, task, device):
        self.name = name
        self.task = task
        self.device = device
        self.tok = AutoTokenizer.from_pretrained(name)
        cls = {
            "mlm": AutoModelForMaskedLM,
            "nli": AutoModelForSequenceClassification,
            "causal": AutoModelForCausalLM,
        }[task]
        self.model = cls.from_pretrained(name, output_hidden_states=True).to(device).eval()
        self.lock = Lock()
        if task == "nli":
            labels = {v.lower(): k for k, v in self.model.config.id2label.items()}
            self.nli_order = [labels["entailment"], labels["neutral"], labels["contradiction"]]

    def info(self):
        return {
            "model": self.name,
            "mask_token": self.tok.mask_token or "",
            "hidden_size": self.model.config.hidden_size,
        }

    def _encode(self, text, **kw):
        return self.tok(text, return_tensors="pt", **kw).to(self.device)

    def _mask_positions(self, enc):
        return (enc["input_ids"][0] == self.tok.mask_token_id).nonzero().flatten().tolist()

    @torch.no_grad()
    def mask_logprobs(self, text):
        enc = self._encode(text)
        pos = self._mask_positions(enc)
        if len(pos) != 1:
            raise ValueError(f"expected one mask, found {len(pos)}")
        logits = self.model(**enc).logits[0, pos[0]]
        lp = torch.log_softmax(logits.float(), dim=-1).tolist()
        return {"tokens": self.tok.convert_ids_to_tokens(list(range(len(lp)))), "logprobs": lp}

    def tokenize(self, word):
        # word-initial pieces: encode after a space, as the word appears mid-sentence
        ids = self.tok(" " + word, add_special_tokens=False)["input_ids"]
        return {"pieces": self.tok.convert_ids_to_tokens(ids)}

    @torch.no_grad()
    def incremental_logprobs(self, text, pieces):
        mask = self.tok.mask_token
        widened = text.replace(mask, mask * len(pieces), 1)
        enc = self._encode(widened)
        pos = self._mask_positions(enc)
        ids = self.tok.convert_tokens_to_ids(pieces)
        out = []
        for p, i in zip(pos, ids):
            logits = self.model(**enc).logits[0, p]
            out.append(torch.log_softmax(logits.float(), dim=-1)[i].item())
            enc["input_ids"][0, p] = i
        return {"logprobs": out}

    @torch.no_grad()
    def embed(self, text, start, end, layer, pooling):
        enc = self._encode(text, return_offsets_mapping=True)
        offsets = enc.pop("offset_mapping")[0].tolist()
        idx = [k for k, (s, e) in enumerate(offsets) if e > s and s < end and e > start]
        if not idx:
            raise ValueError(f"cannot align span {start}..{end}")
        states = self.model(**enc).hidden_states
        if layer == "mean_last_four":
            h, reported = torch.stack(states[-4:]).mean(0)[0], -4
        else:
            h, reported = states[-1][0], -1
        v = h[idx[0]] if pooling == "first_subtoken" else h[idx].mean(0)
        return {"values": v.float().tolist(), "layer": reported}

    @torch.no_grad()
    def nli(self, premise, hypothesis):
        enc = self.tok(premise, hypothesis, return_tensors="pt").to(self.device)
        probs = torch.softmax(self.model(**enc).logits[0].float(), dim=-1)
        return {"probs": [probs[i].item() for i in self.nli_order]}

    @torch.no_grad()
    def sentence_logprob(self, text):
        ids = self._encode(text)["input_ids"]
        if self.tok.bos_token_id is not None:
            ids = torch.cat([torch.tensor([[self.tok.bos_token_id]], device=self.device), ids], dim=1)
        logits = self.model(input_ids=ids).logits[0, :-1].float()
        lp = torch.log_softmax(logits, dim=-1).gather(1, ids[0, 1:].unsqueeze(1))
        return {"logprob": lp.sum().item()}


def handler_for(backend):
    routes = {
        "/mask_logprobs": lambda b: backend.mask_logprobs(b["text"]),
        "/tokenize": lambda b: backend.tokenize(b["word"]),
        "/incremental_logprobs": lambda b: backend.incremental_logprobs(b["text"], b["pieces"]),
        "/embed": lambda b: backend.embed(b["text"], b["start"], b["end"], b.get("layer", "last"),
                                          b.get("pooling", "mean_subtokens")),
        "/nli": lambda b: backend.nli(b["premise"], b["hypothesis"]),
        "/sentence_logprob": lambda b: backend.sentence_logprob(b["text"]),
    }

    class Handler(BaseHTTPRequestHandler):
        def _send(self, code, obj):
            data = json.dumps(obj).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            if self.path == "/info":
                self._send(200, backend.info())
            else:
                self._send(404, {"error": "not found"})

        def do_POST(self):
            route = routes.get(self.path)
            if route is None:
                return self._send(404, {"error": "not found"})
            try:
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                with backend.lock:
                    self._send(200, route(body))
            except (KeyError, ValueError) as e:
                self._send(400, {"error": str(e)})

        def log_message(self, *args):
            pass

    return Handler


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", required=True)
    ap.add_argument("--task", choices=["mlm", "nli", "causal"], default="mlm")
    ap.add_argument("--port", type=int, default=8765)
    ap.add_argument("--device", default="cuda" if torch.cuda.is_available() else "cpu")
    args = ap.parse_args()
    backend = Backend(args.model, args.task, args.device)
    ThreadingHTTPServer(("127.0.0.1", args.port), handler_for(backend)).serve_forever()


if __name__ == "__main__":
    main()
