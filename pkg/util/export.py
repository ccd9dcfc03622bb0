# -*- coding: utf-8 -*-
"""산출물 기록(원자적 쓰기)과 보고서 내보내기(텍스트 / Excel / PDF)."""
from __future__ import annotations

import io
import json
import os
import re
import tempfile
import zipfile
from datetime import datetime
from typing import Any, Dict, Mapping, Optional

import pandas as pd

from util.errors import DataError, ErrorCode

# PDF 라이브러리
try:
    from reportlab.lib import colors
    from reportlab.lib.pagesizes import A4, landscape
    from reportlab.lib.styles import ParagraphStyle
    from reportlab.pdfbase import pdfmetrics
    from reportlab.pdfbase.ttfonts import TTFont
    from reportlab.platypus import Image as RLImage
    from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle
    PDF_AVAILABLE = True
except ImportError:
    PDF_AVAILABLE = False


# ==========================
# 원자적 쓰기
# ==========================
def atomic_write_bytes(path: str, payload: bytes) -> str:
    """같은 디렉터리의 임시 파일에 쓴 뒤 rename."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise DataError(ErrorCode.IO_FAILURE, f"파일을 쓸 수 없습니다: {path} ({exc})") from exc
    return path


def atomic_write_text(path: str, text: str) -> str:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str, obj: Any) -> str:
    """엄격한 JSON만 쓴다. NaN/Infinity는 None으로 바꿔서 넘겨야 한다."""
    try:
        text = json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True, allow_nan=False)
    except ValueError as exc:
        raise DataError(ErrorCode.INVALID_VALUE, f"JSON으로 쓸 수 없는 값: {path} ({exc})") from exc
    return atomic_write_text(path, text + "\n")


def write_frame_csv(path: str, frame: pd.DataFrame) -> str:
    return atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g", lineterminator="\n"))


def read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(ErrorCode.IO_FAILURE, f"파일을 읽을 수 없습니다: {path} ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise DataError(ErrorCode.SCHEMA_MISMATCH, f"JSON 형식 오류: {path} ({exc})") from exc


# ==========================
# 보고서
# ==========================
def format_tables_text(tables: Mapping[str, pd.DataFrame], float_digits: int = 4) -> str:
    """표 묶음을 사람이 읽는 텍스트로. 단위는 각 표의 열 이름에 들어 있다."""
    blocks = []
    for title, frame in tables.items():
        if frame is None or frame.empty:
            continue
        body = frame.to_string(index=False, float_format=lambda v: f"{v:.{float_digits}f}")
        blocks.append(f"== {title} ==\n{body}")
    return "\n\n".join(blocks) + "\n"


def _sheet_name(title: str) -> str:
    bad = '[]:*?/\\'
    cleaned = "".join("_" if ch in bad else ch for ch in title)
    return cleaned[:31] or "Sheet"


ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)
_CORE_STAMP = re.compile(rb"(<dcterms:(?:created|modified)[^>]*>)[^<]*(</dcterms:)")


def _pin_xlsx(payload: bytes) -> bytes:
    """zip 항목 시각과 문서 생성/수정 시각을 고정해 같은 표는 같은 바이트가 되게 한다."""
    out = io.BytesIO()
    with zipfile.ZipFile(io.BytesIO(payload)) as src, zipfile.ZipFile(out, "w", zipfile.ZIP_DEFLATED) as dst:
        for info in src.infolist():
            data = src.read(info.filename)
            if info.filename == "docProps/core.xml":
                data = _CORE_STAMP.sub(rb"\g<1>1980-01-01T00:00:00Z\g<2>", data)
            pinned = zipfile.ZipInfo(info.filename, date_time=ZIP_EPOCH)
            pinned.compress_type = zipfile.ZIP_DEFLATED
            pinned.external_attr = info.external_attr
            dst.writestr(pinned, data)
    return out.getvalue()


def create_excel_report(tables: Mapping[str, pd.DataFrame], metadata: Optional[Dict[str, Any]] = None) -> bytes:
    """표마다 시트 하나씩 담은 Excel 바이트."""
    output = io.BytesIO()
    with pd.ExcelWriter(output, engine='openpyxl') as writer:
        for title, frame in tables.items():
            if frame is not None and not frame.empty:
                frame.to_excel(writer, sheet_name=_sheet_name(title), index=False)
        if metadata:
            pd.DataFrame(
                {"key": list(metadata.keys()), "value": [str(v) for v in metadata.values()]}
            ).to_excel(writer, sheet_name="metadata", index=False)
    output.seek(0)
    return _pin_xlsx(output.getvalue())


def _register_fonts() -> Dict[str, str]:
    """레포 fonts 폴더의 나눔 글꼴을 등록하고, 없으면 기본 글꼴 이름을 돌려준다."""
    base_dir = os.path.dirname(os.path.abspath(__file__))
    font_paths = {
        "Korean": os.path.join(base_dir, "fonts", "NanumGothic.ttf"),
        "KoreanBold": os.path.join(base_dir, "fonts", "NanumGothicBold.ttf"),
    }
    for family, path in font_paths.items():
        if os.path.exists(path) and family not in pdfmetrics.getRegisteredFontNames():
            try:
                pdfmetrics.registerFont(TTFont(family, path))
            except Exception:
                pass
    registered = pdfmetrics.getRegisteredFontNames()
    return {
        "body": "Korean" if "Korean" in registered else "Helvetica",
        "bold": "KoreanBold" if "KoreanBold" in registered else "Helvetica-Bold",
    }


def _fig_to_png_bytes(fig, width=900, height=450):
    """Plotly 차트를 PNG 바이트로. kaleido가 없으면 None."""
    try:
        return fig.to_image(format="png", width=width, height=height)
    except Exception:
        return None


def _cell(value) -> str:
    if isinstance(value, float):
        return "" if pd.isna(value) else f"{value:.4f}"
    return str(value)


def create_pdf_report(
    tables: Mapping[str, pd.DataFrame],
    title: str = "Defensibility Audit Report",
    charts: Optional[Mapping[str, Any]] = None,
    report_author: str = "보고자 미기재",
    report_date: Optional[str] = None,
) -> Optional[bytes]:
    """
    report_date를 주면 작성일로 쓰고 PDF 메타데이터도 고정한다(같은 입력, 같은 바이트).

    • 제목 : 굵은 글꼴 18pt
    • 표   : ReportLab Table, 표마다 섹션 하나
    • 차트 : Plotly → PNG (kaleido 미설치 시 생략)
    """
    if not PDF_AVAILABLE:
        return None
    fonts = _register_fonts()
    title_style = ParagraphStyle('TITLE', fontName=fonts["bold"], fontSize=18, leading=28, spaceAfter=14)
    heading_style = ParagraphStyle(
        'HEADING', fontName=fonts["bold"], fontSize=12, leading=20,
        textColor=colors.HexColor('#E31E24'), spaceBefore=12, spaceAfter=8,
    )
    body_style = ParagraphStyle('BODY', fontName=fonts["body"], fontSize=10, leading=16, spaceAfter=6)

    buff = io.BytesIO()

    def _page_no(canvas, doc):
        canvas.setFont('Helvetica', 9)
        canvas.drawCentredString(landscape(A4)[0] / 2, 18, f"- {canvas.getPageNumber()} -")

    doc = SimpleDocTemplate(
        buff, pagesize=landscape(A4), leftMargin=36, rightMargin=36, topMargin=36, bottomMargin=36,
        invariant=1 if report_date else None,
    )
    stamp = report_date or datetime.now().strftime('%Y-%m-%d')
    story = [
        Paragraph(title, title_style),
        Paragraph(f"작성일: {stamp}    작성자: {report_author}", body_style),
        Spacer(1, 10),
    ]
    for number, (name, frame) in enumerate(tables.items(), start=1):
        if frame is None or frame.empty:
            continue
        story.append(Paragraph(f"{number}. {name}", heading_style))
        data = [[str(c) for c in frame.columns]] + [[_cell(v) for v in row] for row in frame.itertuples(index=False)]
        tbl = Table(data, repeatRows=1)
        tbl.setStyle(TableStyle([
            ('GRID', (0, 0), (-1, -1), 0.5, colors.black),
            ('BACKGROUND', (0, 0), (-1, 0), colors.HexColor('#F2F2F2')),
            ('FONTNAME', (0, 0), (-1, 0), fonts["bold"]),
            ('FONTNAME', (0, 1), (-1, -1), fonts["body"]),
            ('FONTSIZE', (0, 0), (-1, -1), 7),
            ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
            ('ROWBACKGROUNDS', (0, 1), (-1, -1), [colors.whitesmoke, colors.HexColor('#F7F7F7')]),
        ]))
        story.append(tbl)
        story.append(Spacer(1, 14))

    for name, fig in (charts or {}).items():
        if fig is None:
            continue
        png = _fig_to_png_bytes(fig)
        if png is None:
            continue
        story.append(Paragraph(name, heading_style))
        story.append(RLImage(io.BytesIO(png), width=640, height=320))
        story.append(Spacer(1, 12))

    doc.build(story, onFirstPage=_page_no, onLaterPages=_page_no)
    buff.seek(0)
    return buff.getvalue()


def write_report(
    path: str,
    tables: Mapping[str, pd.DataFrame],
    metadata: Optional[Dict[str, Any]] = None,
    report_date: Optional[str] = None,
) -> str:
    """확장자에 따라 .xlsx / .pdf / 그 외(텍스트)로 기록한다."""
    lower = path.lower()
    if lower.endswith(".xlsx"):
        return atomic_write_bytes(path, create_excel_report(tables, metadata))
    if lower.endswith(".pdf"):
        payload = create_pdf_report(tables, report_date=report_date)
        if payload is None:
            raise DataError(ErrorCode.IO_FAILURE, "reportlab이 설치되어 있지 않아 PDF를 만들 수 없습니다")
        return atomic_write_bytes(path, payload)
    header = ""
    if metadata:
        header = "".join(f"# {k}: {v}\n" for k, v in metadata.items()) + "\n"
    return atomic_write_text(path, header + format_tables_text(tables))
