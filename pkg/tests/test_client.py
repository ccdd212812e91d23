"""Model client against the bundled mock server: cache, retries, concurrency."""

import io
import threading

import pytest
from PIL import Image

from spatialkit.client import (
    ChatMessage,
    EndpointConfig,
    ImagePart,
    ModelClient,
    ProviderError,
    RetryExhaustedError,
    TextPart,
    UnsupportedMediaTypeError,
    cache_key_for,
    downscale_image,
    encode_image_part,
)
from spatialkit.mockserver import MockChatServer, MockScript, ScriptRule


def png_bytes(w=4, h=4, color=(200, 30, 30)):
    im = Image.new("RGB", (w, h), color)
    out = io.BytesIO()
    im.save(out, format="PNG")
    return out.getvalue()


@pytest.fixture()
def server():
    script = MockScript(
        rules=[
            ScriptRule(contains="car", response="<x_0><y_3><x_3><y_6>"),
            ScriptRule(contains="slow", response="done", delay_s=0.05),
            ScriptRule(contains="explode", response="boom", status=500),
            ScriptRule(contains="reject", response="bad request", status=400),
        ],
        default_response="default reply",
    )
    with MockChatServer(script) as srv:
        yield srv


def config_for(server, **overrides):
    defaults = dict(
        base_url=server.base_url,
        model_name="mock-model",
        max_retries=2,
        retry_backoff_s=0.0,
        timeout_s=5.0,
    )
    defaults.update(overrides)
    return EndpointConfig(**defaults)


class TestChatComplete:
    def test_scripted_token_string(self, server, tmp_path):
        client = ModelClient(config_for(server), cache_dir=tmp_path / "cache")
        reply = client.chat_complete([ChatMessage.user_text("where is the car?")])
        assert reply == "<x_0><y_3><x_3><y_6>"

    def test_cache_hit_skips_network(self, server, tmp_path):
        client = ModelClient(config_for(server), cache_dir=tmp_path / "cache")
        messages = [ChatMessage.user_text("where is the car?")]
        first = client.chat_complete(messages, cache_mode="use")
        calls_after_first = server.stats()["calls"]
        second = client.chat_complete(messages, cache_mode="use")
        assert first == second
        assert server.stats()["calls"] == calls_after_first
        assert client.network_calls == 1

    def test_bypass_always_calls_and_leaves_cache_alone(self, server, tmp_path):
        cache_dir = tmp_path / "cache"
        client = ModelClient(config_for(server), cache_dir=cache_dir)
        messages = [ChatMessage.user_text("anything")]
        client.chat_complete(messages, cache_mode="use")
        cached_files = sorted(p.name for p in cache_dir.iterdir())
        client.chat_complete(messages, cache_mode="bypass")
        assert server.stats()["calls"] == 2
        assert sorted(p.name for p in cache_dir.iterdir()) == cached_files

    def test_refresh_overwrites(self, server, tmp_path):
        client = ModelClient(config_for(server), cache_dir=tmp_path / "cache")
        messages = [ChatMessage.user_text("anything")]
        client.chat_complete(messages, cache_mode="use")
        client.chat_complete(messages, cache_mode="refresh")
        assert server.stats()["calls"] == 2
        # Entry still served afterwards.
        client.chat_complete(messages, cache_mode="use")
        assert server.stats()["calls"] == 2

    def test_provider_4xx_raises_typed_error(self, server, tmp_path):
        client = ModelClient(config_for(server), cache_dir=tmp_path / "cache")
        with pytest.raises(ProviderError) as err:
            client.chat_complete([ChatMessage.user_text("reject this")])
        assert err.value.status_code == 400
        # 4xx is not retriable.
        assert server.stats()["calls"] == 1

    def test_retry_budget_is_one_plus_max_retries(self, server, tmp_path):
        client = ModelClient(
            config_for(server, max_retries=3), cache_dir=tmp_path / "cache"
        )
        with pytest.raises(RetryExhaustedError) as err:
            client.chat_complete([ChatMessage.user_text("explode now")])
        assert server.stats()["calls"] == 4
        assert len(err.value.attempts) == 4

    def test_bounded_concurrency_high_water(self, server, tmp_path):
        client = ModelClient(
            config_for(server, max_concurrent_requests=2),
            cache_dir=tmp_path / "cache",
        )
        threads = [
            threading.Thread(
                target=client.chat_complete,
                args=([ChatMessage.user_text(f"slow {i}")],),
                kwargs={"cache_mode": "bypass"},
            )
            for i in range(8)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert server.stats()["calls"] == 8
        assert server.stats()["high_water"] <= 2

    def test_no_cache_dir_means_no_store(self, server):
        client = ModelClient(config_for(server))
        messages = [ChatMessage.user_text("anything")]
        client.chat_complete(messages)
        client.chat_complete(messages)
        assert server.stats()["calls"] == 2


class TestCacheKey:
    def test_identical_requests_same_key(self):
        cfg = EndpointConfig(base_url="http://x", model_name="m")
        messages = [ChatMessage.user_text("hello")]
        assert cache_key_for(cfg, messages) == cache_key_for(cfg, messages)

    def test_key_covers_model_temperature_and_tokens(self):
        messages = [ChatMessage.user_text("hello")]
        base = EndpointConfig(base_url="http://x", model_name="m", temperature=0.0)
        other_model = EndpointConfig(base_url="http://x", model_name="m2", temperature=0.0)
        other_temp = EndpointConfig(base_url="http://x", model_name="m", temperature=0.7)
        other_max = EndpointConfig(
            base_url="http://x", model_name="m", temperature=0.0, max_output_tokens=64
        )
        keys = {
            cache_key_for(cfg, messages)
            for cfg in (base, other_model, other_temp, other_max)
        }
        assert len(keys) == 4

    def test_key_ignores_transport_settings(self):
        messages = [ChatMessage.user_text("hello")]
        a = EndpointConfig(base_url="http://x", model_name="m", max_retries=0)
        b = EndpointConfig(base_url="http://y", model_name="m", max_retries=5, timeout_s=1)
        assert cache_key_for(a, messages) == cache_key_for(b, messages)

    def test_key_depends_on_image_content(self):
        cfg = EndpointConfig(base_url="http://x", model_name="m")
        msg_a = [ChatMessage.user_parts(TextPart("t"), ImagePart(png_bytes(), "image/png"))]
        msg_b = [
            ChatMessage.user_parts(
                TextPart("t"), ImagePart(png_bytes(color=(0, 0, 1)), "image/png")
            )
        ]
        assert cache_key_for(cfg, msg_a) != cache_key_for(cfg, msg_b)

    def test_canonical_serialization_is_order_insensitive(self):
        # Same logical request assembled in different part orders stays the
        # same key only when the content order matches; canonical JSON sorts
        # map keys so equal content always hashes equal.
        import json

        from spatialkit.client import canonical_request

        cfg = EndpointConfig(base_url="http://x", model_name="m")
        messages = [ChatMessage.user_text("hello")]
        canon = canonical_request(cfg, messages)
        shuffled = {k: canon[k] for k in reversed(list(canon))}
        assert json.dumps(canon, sort_keys=True) == json.dumps(shuffled, sort_keys=True)


class TestImageEncoding:
    def test_png_data_uri_prefix(self):
        part = encode_image_part(png_bytes(), "image/png")
        assert part["type"] == "image_url"
        assert part["image_url"]["url"].startswith("data:image/png;base64,")

    def test_jpeg_data_uri_prefix(self):
        im = Image.new("RGB", (4, 4), (1, 2, 3))
        out = io.BytesIO()
        im.save(out, format="JPEG")
        part = encode_image_part(out.getvalue(), "image/jpeg")
        assert part["image_url"]["url"].startswith("data:image/jpeg;base64,")

    def test_unsupported_media_type(self):
        with pytest.raises(UnsupportedMediaTypeError):
            encode_image_part(b"GIF89a", "image/gif")

    def test_downscale_leaves_small_images_untouched(self):
        data = png_bytes(32, 32)
        assert downscale_image(data, "image/png", max_edge=1568) is data

    def test_downscale_shrinks_longest_edge(self):
        data = png_bytes(400, 100)
        shrunk = downscale_image(data, "image/png", max_edge=200)
        with Image.open(io.BytesIO(shrunk)) as im:
            assert max(im.size) == 200
            assert im.size == (200, 50)

    def test_empty_image_part_rejected(self):
        with pytest.raises(ValueError):
            ImagePart(b"", "image/png")


class TestMessageValidation:
    def test_bad_role(self):
        with pytest.raises(ValueError):
            ChatMessage(role="tool", parts=(TextPart("x"),))

    def test_empty_parts(self):
        with pytest.raises(ValueError):
            ChatMessage(role="user", parts=())

    def test_endpoint_validation(self):
        with pytest.raises(ValueError):
            EndpointConfig(base_url="", model_name="m")
        with pytest.raises(ValueError):
            EndpointConfig(base_url="http://x", model_name="m", max_concurrent_requests=0)
        with pytest.raises(ValueError):
            EndpointConfig(base_url="http://x", model_name="m", max_retries=-1)

    def test_api_key_from_named_env_var(self, monkeypatch):
        cfg = EndpointConfig(base_url="http://x", model_name="m", api_key_source="MY_KEY")
        monkeypatch.setenv("MY_KEY", "s3cret")
        assert cfg.api_key() == "s3cret"
        monkeypatch.delenv("MY_KEY")
        assert cfg.api_key() == ""
