Page({
  onLoad: function () {
    // read what the user copied elsewhere and prefill the search box
    wx.getClipboardData({
      success: function (res) {
        app.globalData.paste = res.data;
      }
    });
  }
});
